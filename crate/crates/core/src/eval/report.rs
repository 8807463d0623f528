//! Accuracy aggregation and the JSON / CSV / Markdown report renderings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dataset::ModalityLabel;
use super::EvalError;
use crate::geometry::Point;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Pooled hit counts. `accuracy` is `None` for an empty cell.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CellStats {
    pub hits: u64,
    pub total: u64,
    pub accuracy: Option<f64>,
}

impl CellStats {
    pub fn from_counts(hits: u64, total: u64) -> Self {
        assert!(hits <= total, "hits {hits} exceed total {total}");
        let accuracy = (total > 0).then(|| hits as f64 / total as f64);
        Self { hits, total, accuracy }
    }

    pub fn merge(&self, other: &CellStats) -> Self {
        Self::from_counts(self.hits + other.hits, self.total + other.total)
    }
}

/// Text, icon and pooled (micro-averaged) cells for one group, or for the
/// whole run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupStats {
    pub text: CellStats,
    pub icon: CellStats,
    pub avg: CellStats,
}

impl GroupStats {
    fn from_cells(text: CellStats, icon: CellStats) -> Self {
        Self { text, icon, avg: text.merge(&icon) }
    }

    pub fn cell(&self, label: ModalityLabel) -> &CellStats {
        match label {
            ModalityLabel::Text => &self.text,
            ModalityLabel::Icon => &self.icon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub group: String,
    pub modality_label: ModalityLabel,
    pub final_point: Option<Point>,
    pub hit: bool,
    pub iterations: usize,
    pub wall_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub generated_unix_ms: u64,
    pub wall_ms: f64,
    pub groups: BTreeMap<String, GroupStats>,
    pub overall: GroupStats,
    /// Sorted by sample id.
    pub records: Vec<SampleRecord>,
}

/// Aggregates per-sample records into per-group and overall cells.
pub fn aggregate(records: &[SampleRecord]) -> (BTreeMap<String, GroupStats>, GroupStats) {
    let mut counts: BTreeMap<&str, [(u64, u64); 2]> = BTreeMap::new();
    for r in records {
        let slot = &mut counts.entry(r.group.as_str()).or_default()[r.modality_label as usize];
        slot.0 += r.hit as u64;
        slot.1 += 1;
    }
    let mut overall = [(0u64, 0u64); 2];
    let groups = counts
        .into_iter()
        .map(|(g, [t, i])| {
            overall[0].0 += t.0;
            overall[0].1 += t.1;
            overall[1].0 += i.0;
            overall[1].1 += i.1;
            (g.to_string(), GroupStats::from_cells(CellStats::from_counts(t.0, t.1), CellStats::from_counts(i.0, i.1)))
        })
        .collect();
    let overall = GroupStats::from_cells(
        CellStats::from_counts(overall[0].0, overall[0].1),
        CellStats::from_counts(overall[1].0, overall[1].1),
    );
    (groups, overall)
}

impl EvalReport {
    pub fn from_records(mut records: Vec<SampleRecord>, wall_ms: f64) -> Self {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let (groups, overall) = aggregate(&records);
        let generated_unix_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Self { schema_version: REPORT_SCHEMA_VERSION, generated_unix_ms, wall_ms, groups, overall, records }
    }

    pub fn hits(&self) -> u64 {
        self.overall.avg.hits
    }

    pub fn total(&self) -> u64 {
        self.overall.avg.total
    }

    /// Overall accuracy in `[0, 1]`; 0 for an empty report.
    pub fn accuracy(&self) -> f64 {
        self.overall.avg.accuracy.unwrap_or(0.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        serde_json::from_str(text).map_err(|e| EvalError::Report(e.to_string()))
    }

    /// One row per non-empty (group, modality) cell.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["group", "modality", "hits", "total", "accuracy"]).expect("in-memory csv");
        for (group, stats) in &self.groups {
            for label in [ModalityLabel::Text, ModalityLabel::Icon] {
                let c = stats.cell(label);
                if c.total == 0 {
                    continue;
                }
                let acc = c.accuracy.map(|a| a.to_string()).unwrap_or_default();
                w.write_record([group.as_str(), label.as_str(), &c.hits.to_string(), &c.total.to_string(), &acc])
                    .expect("in-memory csv");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }

    /// Markdown table with this report as its single row.
    pub fn to_markdown(&self, label: &str) -> String {
        markdown_table(&[(label, self)])
    }
}

/// Rebuilds group and overall cells from [`EvalReport::to_csv`] output.
pub fn aggregate_csv(text: &str) -> Result<(BTreeMap<String, GroupStats>, GroupStats), EvalError> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let mut cells: BTreeMap<String, [CellStats; 2]> = BTreeMap::new();
    for row in rd.records() {
        let row = row.map_err(|e| EvalError::Report(e.to_string()))?;
        let bad = || EvalError::Report(format!("malformed csv row {row:?}"));
        let label = ModalityLabel::parse(row.get(1).ok_or_else(bad)?).ok_or_else(bad)?;
        let hits: u64 = row.get(2).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let total: u64 = row.get(3).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        cells.entry(row.get(0).ok_or_else(bad)?.to_string()).or_default()[label as usize] =
            CellStats::from_counts(hits, total);
    }
    let mut text_all = CellStats::default();
    let mut icon_all = CellStats::default();
    let groups = cells
        .into_iter()
        .map(|(g, [t, i])| {
            text_all = text_all.merge(&t);
            icon_all = icon_all.merge(&i);
            (g, GroupStats::from_cells(t, i))
        })
        .collect();
    Ok((groups, GroupStats::from_cells(text_all, icon_all)))
}

fn pct(c: &CellStats) -> String {
    match c.accuracy {
        Some(a) => format!("{:.1}", a * 100.0),
        None => "-".into(),
    }
}

/// Comparison table: one row per labelled report, each group as a
/// text/icon/avg column triple, followed by the overall Avg triple. Values
/// are percentages with one decimal; empty cells render as `-`.
pub fn markdown_table(rows: &[(&str, &EvalReport)]) -> String {
    let mut groups: Vec<&str> = rows.iter().flat_map(|(_, r)| r.groups.keys().map(String::as_str)).collect();
    groups.sort_unstable();
    groups.dedup();

    let mut header = vec!["Config".to_string()];
    for g in groups.iter().copied().chain(["Avg"]) {
        for sub in ["text", "icon", "avg"] {
            header.push(format!("{g} {sub}"));
        }
    }
    let mut out = format!("| {} |\n", header.join(" | "));
    out.push_str(&format!("|{}\n", vec!["---|"; header.len()].concat()));
    let empty = GroupStats::default();
    for (label, report) in rows {
        let mut cells = vec![label.to_string()];
        for g in &groups {
            let s = report.groups.get(*g).unwrap_or(&empty);
            cells.extend([pct(&s.text), pct(&s.icon), pct(&s.avg)]);
        }
        let o = &report.overall;
        cells.extend([pct(&o.text), pct(&o.icon), pct(&o.avg)]);
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
    }
    out
}
