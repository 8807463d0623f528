#![allow(dead_code)]

pub mod props;
pub mod stub;
pub mod wire_checks;

use std::path::{Path, PathBuf};

use dimo::backend::wire::{build_request, WireCall};
use dimo::backend::{BackendConfig, BackendKind, ModalityTag, ScriptQueue, ScriptedBackend};
use dimo::engine::{ground, EngineConfig, EngineMode, GroundingResult, TraceDocument};
use dimo::eval::{evaluate, EvalOptions, EvalReport, Sample};
use dimo::geometry::{point_in_box, CoordConvention, Point, Size};
use dimo::synthetic::{build_samples, GenConfig, OracleConfig, OracleProvider, RenderedScreens};
use image::RgbImage;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Compares `actual` with the committed fixture byte for byte. With
/// `DIMO_BLESS=1` the fixture is rewritten instead.
pub fn check_golden(name: &str, actual: &[u8]) -> Result<(), String> {
    let path = fixture(name);
    if std::env::var_os("DIMO_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        return Ok(());
    }
    let (e, a) = (String::from_utf8_lossy(&expected), String::from_utf8_lossy(actual));
    let line = e.lines().zip(a.lines()).position(|(x, y)| x != y).unwrap_or(e.lines().count().min(a.lines().count()));
    Err(format!("{name} differs from fixture at line {}", line + 1))
}

pub const GOLDEN_INSTRUCTION: &str = "click the center of the screen";

fn scripted(convention: CoordConvention, predict: &[&str]) -> ScriptedBackend {
    let queue = ScriptQueue { predict: predict.iter().map(|s| s.to_string()).collect(), select: vec![] };
    ScriptedBackend::new(convention, queue)
}

fn run_document(cfg: &EngineConfig, backend: &ScriptedBackend) -> (GroundingResult, String) {
    let img = RgbImage::new(1000, 600);
    let result = ground(&img, GOLDEN_INSTRUCTION, cfg, backend).expect("scripted run succeeds");
    let doc = TraceDocument::new(GOLDEN_INSTRUCTION, &img, cfg, result.clone()).to_json() + "\n";
    (result, doc)
}

/// Two identical normalized answers on 1000x600: converges at t=2.
pub fn convergent_run() -> (GroundingResult, String) {
    let cfg = EngineConfig { mode: EngineMode::DynamicOnly, ..EngineConfig::default() };
    run_document(&cfg, &scripted(CoordConvention::Normalized01, &["(0.5, 0.5)", "(0.5, 0.5)"]))
}

/// Answers alternate between opposite corners of each crop, so consecutive
/// points are always a full crop diagonal apart and never converge.
pub fn max_iters_run() -> (GroundingResult, String) {
    let cfg = EngineConfig { mode: EngineMode::DynamicOnly, min_region_side: 1, ..EngineConfig::default() };
    let corners: Vec<&str> = (0..7).map(|i| if i % 2 == 0 { "(0, 0)" } else { "(1000, 1000)" }).collect();
    run_document(&cfg, &scripted(CoordConvention::Normalized1000, &corners))
}

pub const WIRE_IMAGE: &[u8] = b"\x89PNG fixture bytes";

pub fn wire_config(kind: BackendKind) -> BackendConfig {
    BackendConfig {
        kind,
        endpoint: "http://127.0.0.1:8000/".into(),
        model: "grounding-model".into(),
        ..BackendConfig::default()
    }
}

/// `(fixture name, url, body)` for every request shape of both HTTP kinds.
pub fn wire_requests() -> Vec<(String, String, Vec<u8>)> {
    let predict = WireCall::Predict {
        instruction: "open the settings menu",
        modality: ModalityTag::Icon,
        frame: Size { width: 500, height: 300 },
    };
    let select = WireCall::Select {
        instruction: "open the settings menu",
        text_candidate: Point::new(120.0, 80.5),
        icon_candidate: Point::new(640.25, 360.0),
    };
    let mut out = Vec::new();
    for (kind, tag) in [(BackendKind::NativeHttp, "native"), (BackendKind::OpenAiCompat, "openai")] {
        for (call, what) in [(&predict, "predict"), (&select, "select")] {
            let req = build_request(WIRE_IMAGE, call, &wire_config(kind)).expect("request builds");
            out.push((format!("wire/{tag}_{what}.json"), req.url, req.body));
        }
    }
    out
}

/// Report with per-record timing and the generation timestamp zeroed.
pub fn normalized(report: &EvalReport) -> EvalReport {
    let mut r = report.clone();
    r.generated_unix_ms = 0;
    r.wall_ms = 0.0;
    for rec in &mut r.records {
        rec.wall_ms = 0.0;
    }
    r
}

/// Recomputes every cell from scratch and compares with `report`.
pub fn brute_force_check(samples: &[Sample], report: &EvalReport) -> Result<(), String> {
    if report.records.len() != samples.len() {
        return Err(format!("{} records for {} samples", report.records.len(), samples.len()));
    }
    let mut groups: Vec<&str> = samples.iter().map(|s| s.group.as_str()).collect();
    groups.sort_unstable();
    groups.dedup();
    let mut all = [(0u64, 0u64); 2];
    for g in &groups {
        let mut cells = [(0u64, 0u64); 2];
        for s in samples.iter().filter(|s| s.group == *g) {
            let rec = report.records.iter().find(|r| r.id == s.id).ok_or(format!("missing record {}", s.id))?;
            let hit = match rec.final_point {
                Some(p) => {
                    let b = s.gt_box;
                    p.x >= b.x as f64
                        && p.x <= (b.x + b.width) as f64
                        && p.y >= b.y as f64
                        && p.y <= (b.y + b.height) as f64
                }
                None => false,
            };
            if hit != rec.hit || hit != rec.final_point.is_some_and(|p| point_in_box(&p, &s.gt_box)) {
                return Err(format!("hit flag mismatch for {}", s.id));
            }
            let slot = &mut cells[s.modality_label as usize];
            slot.0 += hit as u64;
            slot.1 += 1;
        }
        let stats = report.groups.get(*g).ok_or(format!("missing group {g}"))?;
        for (i, cell) in [&stats.text, &stats.icon].into_iter().enumerate() {
            if (cell.hits, cell.total) != cells[i] {
                return Err(format!("group {g} cell {i}: report {:?} vs brute force {:?}", (cell.hits, cell.total), cells[i]));
            }
            all[i].0 += cells[i].0;
            all[i].1 += cells[i].1;
        }
        let (h, t) = (cells[0].0 + cells[1].0, cells[0].1 + cells[1].1);
        if (stats.avg.hits, stats.avg.total) != (h, t) {
            return Err(format!("group {g} avg mismatch"));
        }
        if t > 0 && stats.avg.accuracy != Some(h as f64 / t as f64) {
            return Err(format!("group {g} accuracy mismatch"));
        }
    }
    let o = &report.overall;
    let (h, t) = (all[0].0 + all[1].0, all[0].1 + all[1].1);
    if (o.text.hits, o.text.total) != all[0] || (o.icon.hits, o.icon.total) != all[1] || (o.avg.hits, o.avg.total) != (h, t) {
        return Err("overall cells differ from brute force".into());
    }
    Ok(())
}

/// Evaluates a noisy synthetic set at parallelism 1 and 8, checks both
/// against the brute-force recomputation and against each other.
pub fn evaluator_equivalence(n: usize) -> Result<(), String> {
    let set = build_samples(n, 99, &GenConfig { distractor_rate: 0.5, ..GenConfig::default() }, 4).map_err(|e| e.to_string())?;
    let images = RenderedScreens(set.screens.clone());
    let oracle = OracleConfig { noise_alpha: 0.08, distractor_bias: 0.5, seed: 5, selection_error_rate: 0.1 };
    let provider = OracleProvider::new(set.screens.clone(), oracle).map_err(|e| e.to_string())?;
    let cfg = EngineConfig { min_region_side: 32, ..EngineConfig::default() };
    let run = |parallelism| {
        let opts = EvalOptions { parallelism, images: &images, ..EvalOptions::default() };
        evaluate(&set.samples, &cfg, &provider, &opts).map_err(|e| e.to_string())
    };
    let (one, eight) = (run(1)?, run(8)?);
    brute_force_check(&set.samples, &one)?;
    brute_force_check(&set.samples, &eight)?;
    if normalized(&one) != normalized(&eight) {
        return Err("parallelism 1 and 8 produced different reports".into());
    }
    if one.hits() == 0 || one.hits() == one.total() {
        return Err(format!("degenerate run: {}/{} hits", one.hits(), one.total()));
    }
    Ok(())
}
