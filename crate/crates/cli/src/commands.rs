use std::fs::File;
use std::io::{LineWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use dimo::backend::{Backend, BackendError, BackendKind, HttpBackend, Script};
use dimo::engine::{EngineConfig, EngineError, EngineMode, GroundingResult, TraceDocument};
use dimo::eval::{
    evaluate, load_dataset, load_image, markdown_table, render_result_overlay, BackendProvider, EvalError, EvalOptions,
    EvalReport, GroupStats, Sample, SampleRecord, SharedBackend,
};
use dimo::synthetic::{load_screens, write_synth_dir, OracleProvider, SynthError};
use serde_json::{json, Value};

use crate::args::{parse_modes, parse_sweep, AblateArgs, Common, ConfigArgs, DatasetArgs, EvalArgs, GroundArgs, SynthArgs};
use crate::config::{FormatSpec, RunConfig};
use crate::CliError;

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

fn install_interrupt_handler() {
    // A second registration in the same process fails harmlessly.
    let _ = ctrlc::set_handler(|| INTERRUPTED.store(true, Ordering::SeqCst));
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn print_json(v: &Value) {
    emit(&serde_json::to_string_pretty(v).expect("json values serialize"));
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

fn backend_error(e: BackendError) -> CliError {
    match e {
        BackendError::InvalidRequest(m) => CliError::Config(m),
        BackendError::Image(m) => CliError::Image(m),
        other => CliError::Backend(other.to_string()),
    }
}

fn load_script(common: &Common) -> Result<Script, CliError> {
    let path = common
        .script
        .as_ref()
        .ok_or_else(|| CliError::Config("the mock backend needs --script <file>".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Script::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn http_backend(cfg: &RunConfig) -> Result<HttpBackend, CliError> {
    HttpBackend::new(cfg.backend.clone()).map_err(backend_error)
}

/// Per-sample backend source for dataset commands.
fn provider(cfg: &RunConfig, common: &Common, manifest: &Path) -> Result<Box<dyn BackendProvider>, CliError> {
    Ok(match cfg.backend.kind {
        BackendKind::Mock => Box::new(load_script(common)?),
        BackendKind::NativeHttp | BackendKind::OpenAiCompat => Box::new(SharedBackend(Arc::new(http_backend(cfg)?))),
        BackendKind::Oracle => {
            let screens = load_screens(manifest).map_err(|e| CliError::Config(e.to_string()))?;
            Box::new(OracleProvider::new(Arc::new(screens), cfg.oracle.clone()).map_err(|e| CliError::Config(e.to_string()))?)
        }
    })
}

pub fn ground(args: &GroundArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(&args.common)?;
    cfg.validate()?;
    let backend: Arc<dyn Backend> = match cfg.backend.kind {
        BackendKind::Mock => Arc::new(load_script(&args.common)?.backend_for(&args.instruction)),
        BackendKind::NativeHttp | BackendKind::OpenAiCompat => Arc::new(http_backend(&cfg)?),
        BackendKind::Oracle => {
            return Err(CliError::Config("the oracle backend only runs over synthetic manifests (use eval)".into()))
        }
    };
    let image = load_image(&args.image).map_err(|e| CliError::Image(e.to_string()))?;
    let result = dimo::ground(&image, &args.instruction, &cfg.engine, backend.as_ref()).map_err(|e| match e {
        EngineError::Backend(b) => backend_error(b),
        EngineError::Config(m) => CliError::Config(m),
        EngineError::Geometry(g) => CliError::Image(g.to_string()),
    })?;
    if let Some(path) = &args.overlay {
        let png = render_result_overlay(&image, &result, None).map_err(|e| CliError::Image(e.to_string()))?;
        write_file(path, png)?;
    }
    emit(&serde_json::to_string_pretty(&result).expect("results serialize"));
    Ok(())
}

/// Merged config with the dataset flags applied.
fn dataset_config(common: &Common, dataset: &DatasetArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(common)?;
    if let Some(f) = &dataset.format {
        cfg.eval.format = FormatSpec::Preset(f.clone());
    }
    if let Some(dir) = &dataset.images_dir {
        cfg.eval.images_dir = Some(dir.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_samples(cfg: &RunConfig, manifest: &Path) -> Result<Vec<Sample>, CliError> {
    let loaded = load_dataset(manifest, &cfg.format()?).map_err(|e| match e {
        EvalError::Image(m) => CliError::Image(m),
        other => CliError::Config(other.to_string()),
    })?;
    for e in &loaded.errors {
        eprintln!("warning: manifest entry {} ({}): {}", e.index, e.id.as_deref().unwrap_or("?"), e.reason);
    }
    if loaded.samples.is_empty() {
        return Err(CliError::NoSamples(format!(
            "{}: no valid samples ({} entries rejected)",
            manifest.display(),
            loaded.errors.len()
        )));
    }
    Ok(loaded.samples)
}

/// Streams records to `records.jsonl` as samples finish, optionally with a
/// trace document and overlay per sample.
struct RecordWriter {
    records: Mutex<LineWriter<File>>,
    artifacts: Option<(PathBuf, EngineConfig)>,
    failures: Mutex<Vec<String>>,
}

impl RecordWriter {
    fn create(dir: &Path, artifacts: Option<EngineConfig>) -> Result<Self, CliError> {
        let path = dir.join("records.jsonl");
        let file = File::create(&path).map_err(io_err(&path))?;
        let artifacts = match artifacts {
            Some(cfg) => {
                for sub in ["traces", "overlays"] {
                    std::fs::create_dir_all(dir.join(sub)).map_err(io_err(dir))?;
                }
                Some((dir.to_path_buf(), cfg))
            }
            None => None,
        };
        Ok(Self { records: Mutex::new(LineWriter::new(file)), artifacts, failures: Mutex::new(Vec::new()) })
    }

    fn record(&self, sample: &Sample, record: &SampleRecord, result: Option<&GroundingResult>) {
        let line = serde_json::to_string(record).expect("records serialize");
        if let Err(e) = writeln!(self.records.lock().unwrap(), "{line}") {
            self.failures.lock().unwrap().push(format!("records.jsonl: {e}"));
        }
        if let (Some((dir, cfg)), Some(result)) = (&self.artifacts, result) {
            if let Err(e) = Self::artifacts(dir, cfg, sample, result) {
                self.failures.lock().unwrap().push(format!("{}: {e}", sample.id));
            }
        }
    }

    fn artifacts(dir: &Path, cfg: &EngineConfig, sample: &Sample, result: &GroundingResult) -> Result<(), String> {
        let image = load_image(&sample.image_path).map_err(|e| e.to_string())?;
        let doc = TraceDocument::new(&sample.instruction, &image, cfg, result.clone());
        let name = sample.id.replace(['/', '\\'], "_");
        std::fs::write(dir.join("traces").join(format!("{name}.json")), doc.to_json() + "\n").map_err(|e| e.to_string())?;
        let png = render_result_overlay(&image, result, Some(sample.gt_box)).map_err(|e| e.to_string())?;
        std::fs::write(dir.join("overlays").join(format!("{name}.png")), png).map_err(|e| e.to_string())
    }

    fn finish(self) -> Result<(), CliError> {
        self.records.into_inner().unwrap().flush().map_err(|e| CliError::Io(format!("records.jsonl: {e}")))?;
        match self.failures.into_inner().unwrap().first() {
            Some(f) => Err(CliError::Io(f.clone())),
            None => Ok(()),
        }
    }
}

fn write_report(dir: &Path, label: &str, report: &EvalReport) -> Result<(), CliError> {
    write_file(&dir.join("report.json"), report.to_json() + "\n")?;
    write_file(&dir.join("report.csv"), report.to_csv())?;
    write_file(&dir.join("report.md"), report.to_markdown(label))
}

fn run_eval(
    samples: &[Sample],
    engine: &EngineConfig,
    provider: &dyn BackendProvider,
    parallelism: usize,
    dir: &Path,
    artifacts: bool,
) -> Result<EvalReport, CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let writer = RecordWriter::create(dir, artifacts.then(|| engine.clone()))?;
    let sink = |s: &Sample, r: &SampleRecord, res: Option<&GroundingResult>| writer.record(s, r, res);
    let opts = EvalOptions { parallelism, cancel: Some(&INTERRUPTED), on_record: Some(&sink), ..EvalOptions::default() };
    let report = evaluate(samples, engine, provider, &opts).map_err(|e| CliError::Config(e.to_string()))?;
    writer.finish()?;
    write_report(dir, engine.mode.as_str(), &report)?;
    Ok(report)
}

fn pct(report: &EvalReport) -> f64 {
    (report.accuracy() * 1000.0).round() / 10.0
}

fn summary(report: &EvalReport) -> Value {
    let errors = report.records.iter().filter(|r| r.error.is_some()).count();
    json!({
        "hits": report.hits(),
        "total": report.total(),
        "accuracy_pct": pct(report),
        "errors": errors,
    })
}

/// Every sample failed because the backend could not be reached.
fn all_unavailable(report: &EvalReport) -> bool {
    !report.records.is_empty()
        && report.records.iter().all(|r| r.error.as_deref().is_some_and(|e| e.starts_with("backend unavailable")))
}

fn finish_dataset_run(reports: &[&EvalReport]) -> Result<(), CliError> {
    if INTERRUPTED.load(Ordering::SeqCst) {
        return Err(CliError::Interrupted);
    }
    if reports.iter().any(|r| all_unavailable(r)) {
        let first = reports.iter().flat_map(|r| &r.records).find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(CliError::Backend(first));
    }
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let mut cfg = dataset_config(&args.common, &args.dataset)?;
    cfg.eval.overlay |= args.overlay;
    let samples = load_samples(&cfg, &args.dataset.manifest)?;
    let provider = provider(&cfg, &args.common, &args.dataset.manifest)?;
    install_interrupt_handler();
    let dir = &cfg.eval.out;
    let report = run_eval(&samples, &cfg.engine, provider.as_ref(), cfg.eval.parallelism, dir, cfg.eval.overlay)?;
    eprint!("{}", report.to_markdown(cfg.engine.mode.as_str()));
    let mut out = summary(&report);
    out["mode"] = json!(cfg.engine.mode.as_str());
    out["out"] = json!(dir);
    out["interrupted"] = json!(INTERRUPTED.load(Ordering::SeqCst));
    print_json(&out);
    finish_dataset_run(&[&report])
}

struct AblationRun {
    mode: EngineMode,
    sweep: Option<u32>,
    engine: EngineConfig,
}

impl AblationRun {
    fn label(&self) -> String {
        match self.sweep {
            Some(v) => format!("{}_sweep{v}", self.mode.as_str()),
            None => self.mode.as_str().to_string(),
        }
    }
}

/// Rows are (mode, cell), columns are sweep points.
fn sweep_table(sweep: &[u32], modes: &[EngineMode], reports: &[(AblationRun, EvalReport)]) -> String {
    let mut groups: Vec<&str> = reports.iter().flat_map(|(_, r)| r.groups.keys().map(String::as_str)).collect();
    groups.sort_unstable();
    groups.dedup();
    let mut out = format!(
        "| Config | {} |\n|---|{}\n",
        sweep.iter().map(|v| format!("max_iter {v}")).collect::<Vec<_>>().join(" | "),
        "---|".repeat(sweep.len())
    );
    let empty = GroupStats::default();
    let cell = |s: &GroupStats, sub: &str| {
        let c = match sub {
            "text" => s.text,
            "icon" => s.icon,
            _ => s.avg,
        };
        c.accuracy.map(|a| format!("{:.1}", a * 100.0)).unwrap_or_else(|| "-".into())
    };
    for mode in modes {
        let row_reports: Vec<&EvalReport> =
            reports.iter().filter(|(r, _)| r.mode == *mode).map(|(_, rep)| rep).collect();
        for g in groups.iter().copied().map(Some).chain([None]) {
            for sub in ["text", "icon", "avg"] {
                let values: Vec<String> = row_reports
                    .iter()
                    .map(|r| match g {
                        Some(g) => cell(r.groups.get(g).unwrap_or(&empty), sub),
                        None => cell(&r.overall, sub),
                    })
                    .collect();
                out.push_str(&format!(
                    "| {} {} {sub} | {} |\n",
                    mode.as_str(),
                    g.unwrap_or("Avg"),
                    values.join(" | ")
                ));
            }
        }
    }
    out
}

pub fn ablate(args: &AblateArgs) -> Result<(), CliError> {
    let cfg = dataset_config(&args.common, &args.dataset)?;
    let modes = match &args.modes {
        Some(spec) => parse_modes(spec).map_err(CliError::Config)?,
        None => vec![cfg.engine.mode],
    };
    let sweep = args.sweep_iters.as_deref().map(parse_sweep).transpose().map_err(CliError::Config)?;
    let mut runs = Vec::new();
    for &mode in &modes {
        match &sweep {
            Some(values) => runs.extend(values.iter().map(|&v| AblationRun {
                mode,
                sweep: Some(v),
                engine: EngineConfig { max_iters: v + 1, ..cfg.engine.with_mode(mode) },
            })),
            None => runs.push(AblationRun { mode, sweep: None, engine: cfg.engine.with_mode(mode) }),
        }
    }

    let samples = load_samples(&cfg, &args.dataset.manifest)?;
    let provider = provider(&cfg, &args.common, &args.dataset.manifest)?;
    install_interrupt_handler();
    let out_dir = &cfg.eval.out;
    let mut results = Vec::with_capacity(runs.len());
    for run in runs {
        if INTERRUPTED.load(Ordering::SeqCst) {
            break;
        }
        let dir = out_dir.join("runs").join(run.label());
        let report = run_eval(&samples, &run.engine, provider.as_ref(), cfg.eval.parallelism, &dir, cfg.eval.overlay)?;
        results.push((run, report));
    }

    let table = match &sweep {
        Some(values) => sweep_table(values, &modes, &results),
        None => {
            let labels: Vec<String> = results.iter().map(|(r, _)| r.label()).collect();
            let rows: Vec<(&str, &EvalReport)> = labels.iter().map(String::as_str).zip(results.iter().map(|(_, r)| r)).collect();
            markdown_table(&rows)
        }
    };
    let entries: Vec<Value> = results
        .iter()
        .map(|(run, report)| {
            let mut v = summary(report);
            v["label"] = json!(run.label());
            v["mode"] = json!(run.mode.as_str());
            v["sweep"] = json!(run.sweep);
            v["max_iters"] = json!(run.engine.max_iters);
            v
        })
        .collect();
    let combined = json!({ "runs": entries });
    write_file(&out_dir.join("ablation.md"), &table)?;
    write_file(&out_dir.join("ablation.json"), serde_json::to_string_pretty(&combined).expect("json") + "\n")?;
    eprint!("{table}");
    print_json(&json!({ "runs": combined["runs"], "table": out_dir.join("ablation.md"), "interrupted": INTERRUPTED.load(Ordering::SeqCst) }));
    let reports: Vec<&EvalReport> = results.iter().map(|(_, r)| r).collect();
    finish_dataset_run(&reports)
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    if args.n == 0 {
        return Err(CliError::Config("--n must be at least 1".into()));
    }
    let mut cfg = RunConfig::load(&args.common)?;
    if let Some(rate) = args.distractor_rate {
        cfg.synth.distractor_rate = rate;
    }
    cfg.validate()?;
    let seed = args.common.seed.unwrap_or(0);
    let out = &cfg.eval.out;
    let n = write_synth_dir(out, args.n, seed, &cfg.synth, cfg.eval.parallelism).map_err(|e| match e {
        SynthError::Config(m) => CliError::Config(m),
        other => CliError::Generation(other.to_string()),
    })?;
    print_json(&json!({ "screens": n, "seed": seed, "manifest": out.join("manifest.json") }));
    Ok(())
}

pub fn config(args: &ConfigArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(&args.common)?;
    cfg.validate()?;
    print_json(&serde_json::to_value(&cfg).expect("config serializes"));
    Ok(())
}
