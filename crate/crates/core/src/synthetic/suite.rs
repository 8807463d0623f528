use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{
    generate_screen, render_screen, BlankScreens, ElementKind, GenConfig, OracleConfig, OracleProvider, ScreenMap,
    SynthError, SynthScreen,
};
use crate::backend::encode_png;
use crate::engine::EngineConfig;
use crate::eval::{evaluate, markdown_table, EvalOptions, EvalReport, ModalityLabel, Sample};

/// Layout seed of screen `index` in a suite seeded with `seed`.
pub fn screen_seed(seed: u64, index: usize) -> u64 {
    let digest = Sha256::digest(format!("{seed}:{index}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn sample_id(index: usize) -> String {
    format!("synth-{index:06}")
}

fn modality_of(screen: &SynthScreen) -> ModalityLabel {
    match screen.target().kind {
        ElementKind::Text => ModalityLabel::Text,
        ElementKind::Icon => ModalityLabel::Icon,
    }
}

fn group_of(screen: &SynthScreen) -> &'static str {
    if screen.distractor_index.is_some() {
        "distractor"
    } else {
        "clean"
    }
}

fn sample_for(index: usize, screen: &SynthScreen) -> Sample {
    let id = sample_id(index);
    Sample {
        image_path: PathBuf::from("screens").join(format!("{id}.png")),
        id,
        instruction: screen.instruction.clone(),
        gt_box: screen.target().bbox,
        modality_label: modality_of(screen),
        group: group_of(screen).into(),
        platform: None,
    }
}

/// Generated screens with their evaluation samples, in index order.
pub struct SyntheticSet {
    pub samples: Vec<Sample>,
    pub screens: Arc<ScreenMap>,
}

/// Generates `n` screens, in parallel per screen. The result depends only on
/// `seed` and `cfg`.
pub fn build_samples(n: usize, seed: u64, cfg: &GenConfig, parallelism: usize) -> Result<SyntheticSet, SynthError> {
    cfg.validate()?;
    let workers = parallelism.clamp(1, n.max(1));
    let chunk = n.div_ceil(workers).max(1);
    let indices: Vec<usize> = (0..n).collect();
    let screens: Vec<SynthScreen> = std::thread::scope(|s| {
        let handles: Vec<_> = indices
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter().map(|&i| generate_screen(screen_seed(seed, i), cfg)).collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("generator thread panicked"))
            .collect::<Result<Vec<Vec<_>>, _>>()
    })?
    .into_iter()
    .flatten()
    .collect();

    let samples: Vec<Sample> = screens.iter().enumerate().map(|(i, s)| sample_for(i, s)).collect();
    let map = samples.iter().zip(screens).map(|(s, screen)| (s.id.clone(), Arc::new(screen))).collect();
    Ok(SyntheticSet { samples, screens: Arc::new(map) })
}

/// Engine and oracle configurations to cross over one shared screen set.
#[derive(Debug, Clone)]
pub struct SuiteSpec {
    pub n_screens: usize,
    pub seed: u64,
    pub gen: GenConfig,
    pub engines: Vec<(String, EngineConfig)>,
    pub oracles: Vec<(String, OracleConfig)>,
    pub parallelism: usize,
}

#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub engine: String,
    pub oracle: String,
    pub engine_config: EngineConfig,
    pub oracle_config: OracleConfig,
    pub report: EvalReport,
}

#[derive(Debug, Clone)]
pub struct SyntheticReport {
    pub n_screens: usize,
    /// Engine-major, in `SuiteSpec` order.
    pub entries: Vec<SuiteEntry>,
}

impl SyntheticReport {
    pub fn get(&self, engine: &str, oracle: &str) -> Option<&SuiteEntry> {
        self.entries.iter().find(|e| e.engine == engine && e.oracle == oracle)
    }

    /// Overall accuracy in `[0, 1]`. Panics on an unknown pair.
    pub fn accuracy(&self, engine: &str, oracle: &str) -> f64 {
        self.get(engine, oracle).unwrap_or_else(|| panic!("no suite entry {engine} / {oracle}")).report.accuracy()
    }

    pub fn hits(&self, engine: &str, oracle: &str) -> u64 {
        self.get(engine, oracle).unwrap_or_else(|| panic!("no suite entry {engine} / {oracle}")).report.hits()
    }

    pub fn to_markdown(&self) -> String {
        let labels: Vec<String> = self.entries.iter().map(|e| format!("{} / {}", e.engine, e.oracle)).collect();
        let rows: Vec<(&str, &EvalReport)> =
            labels.iter().map(String::as_str).zip(self.entries.iter().map(|e| &e.report)).collect();
        markdown_table(&rows)
    }
}

/// Evaluates every (engine, oracle) pair over the same screens through the
/// standard evaluator, on blank canvases of each screen's size. Backend
/// errors would show up as misses; only generation and configuration errors
/// abort the suite.
pub fn run_synthetic_suite(spec: &SuiteSpec) -> Result<SyntheticReport, SynthError> {
    if spec.n_screens == 0 {
        return Err(SynthError::Config("n_screens must be at least 1".into()));
    }
    for (label, cfg) in &spec.engines {
        cfg.validate().map_err(|e| SynthError::Config(format!("engine `{label}`: {e}")))?;
    }
    let set = build_samples(spec.n_screens, spec.seed, &spec.gen, spec.parallelism)?;
    let images = BlankScreens(set.screens.clone());
    let mut entries = Vec::with_capacity(spec.engines.len() * spec.oracles.len());
    for (engine, engine_config) in &spec.engines {
        for (oracle, oracle_config) in &spec.oracles {
            let provider = OracleProvider::new(set.screens.clone(), oracle_config.clone())?;
            let opts = EvalOptions { parallelism: spec.parallelism.max(1), images: &images, ..EvalOptions::default() };
            let report = evaluate(&set.samples, engine_config, &provider, &opts)?;
            entries.push(SuiteEntry {
                engine: engine.clone(),
                oracle: oracle.clone(),
                engine_config: engine_config.clone(),
                oracle_config: oracle_config.clone(),
                report,
            });
        }
    }
    Ok(SyntheticReport { n_screens: spec.n_screens, entries })
}

/// Writes `screens/<id>.png` and `manifest.json` under `out`. The manifest
/// uses the native dataset layout plus a `screen` object per entry, which
/// the oracle backend reads back with [`load_screens`].
pub fn write_synth_dir(out: &Path, n: usize, seed: u64, cfg: &GenConfig, parallelism: usize) -> Result<usize, SynthError> {
    if n == 0 {
        return Err(SynthError::Config("n must be at least 1".into()));
    }
    let set = build_samples(n, seed, cfg, parallelism)?;
    let io = |e: std::io::Error| SynthError::Io(e.to_string());
    std::fs::create_dir_all(out.join("screens")).map_err(io)?;

    let mut entries = Vec::with_capacity(n);
    for sample in &set.samples {
        let screen = &set.screens[&sample.id];
        let png = encode_png(&render_screen(screen)).map_err(|e| SynthError::Image(e.to_string()))?;
        std::fs::write(out.join(&sample.image_path), png).map_err(io)?;
        let b = sample.gt_box;
        entries.push(json!({
            "id": sample.id,
            "image": sample.image_path.to_string_lossy().replace('\\', "/"),
            "instruction": sample.instruction,
            "bbox": [b.x, b.y, b.width, b.height],
            "modality": sample.modality_label.as_str(),
            "group": sample.group,
            "screen": screen.as_ref(),
        }));
    }
    let text = serde_json::to_string_pretty(&Value::Array(entries)).expect("manifest serializes");
    std::fs::write(out.join("manifest.json"), text + "\n").map_err(io)?;
    Ok(n)
}

#[derive(Deserialize, Serialize)]
struct ScreenEntry {
    id: String,
    screen: SynthScreen,
}

/// Reads the `screen` objects of a synthetic manifest, keyed by id.
pub fn load_screens(manifest: &Path) -> Result<ScreenMap, SynthError> {
    let text = std::fs::read_to_string(manifest).map_err(|e| SynthError::Io(format!("{}: {e}", manifest.display())))?;
    let entries: Vec<Value> = serde_json::from_str(&text)
        .map_err(|e| SynthError::Config(format!("{}: expected a JSON array: {e}", manifest.display())))?;
    let mut map = HashMap::new();
    for (i, v) in entries.into_iter().enumerate() {
        let e: ScreenEntry = serde_json::from_value(v)
            .map_err(|e| SynthError::Config(format!("entry {i} is not a synthetic sample: {e}")))?;
        e.screen.validate().map_err(|m| SynthError::Config(format!("entry {i}: {m}")))?;
        map.insert(e.id, Arc::new(e.screen));
    }
    Ok(map)
}
