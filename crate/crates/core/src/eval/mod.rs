//! Benchmark ingestion, parallel evaluation, reporting and trace overlays.

use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use image::RgbImage;
use thiserror::Error;

use crate::backend::{Backend, BackendError, Script};
use crate::engine::{ground, EngineConfig, EngineError, GroundingResult};
use crate::geometry::point_in_box;

mod dataset;
mod overlay;
mod report;

pub use dataset::{
    bbox_to_region, load_dataset, BboxConvention, FieldMap, FormatConfig, LoadError, LoadedDataset, ModalityLabel,
    Sample,
};
pub use overlay::{overlay_shapes, rasterize_overlay, render_result_overlay, render_trace_overlay, OverlayShape};
pub use report::{
    aggregate, aggregate_csv, markdown_table, CellStats, EvalReport, GroupStats, SampleRecord, REPORT_SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("report error: {0}")]
    Report(String),
    #[error("image error: {0}")]
    Image(String),
    #[error("parallelism must be at least 1")]
    Parallelism,
}

/// Supplies the backend that grounds a given sample.
pub trait BackendProvider: Send + Sync {
    fn backend_for(&self, sample: &Sample) -> Result<Arc<dyn Backend>, BackendError>;
}

/// One backend shared by every sample, e.g. a stateless HTTP client.
pub struct SharedBackend(pub Arc<dyn Backend>);

impl BackendProvider for SharedBackend {
    fn backend_for(&self, _: &Sample) -> Result<Arc<dyn Backend>, BackendError> {
        Ok(self.0.clone())
    }
}

/// Every sample replays its own copy of the script, selected by instruction.
impl BackendProvider for Script {
    fn backend_for(&self, sample: &Sample) -> Result<Arc<dyn Backend>, BackendError> {
        Ok(Arc::new(self.backend_for(&sample.instruction)))
    }
}

/// Where sample pixels come from.
pub trait ImageSource: Send + Sync {
    fn load(&self, sample: &Sample) -> Result<Arc<RgbImage>, String>;
}

/// Decodes `sample.image_path` from disk.
pub struct FileImages;

impl ImageSource for FileImages {
    fn load(&self, sample: &Sample) -> Result<Arc<RgbImage>, String> {
        load_image(&sample.image_path).map(Arc::new).map_err(|e| e.to_string())
    }
}

pub fn load_image(path: &Path) -> Result<RgbImage, EvalError> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|e| EvalError::Image(format!("{}: {e}", path.display())))
}

/// Called once per finished sample, from the worker that ran it.
pub type RecordSink<'a> = &'a (dyn Fn(&Sample, &SampleRecord, Option<&GroundingResult>) + Sync);

pub struct EvalOptions<'a> {
    pub parallelism: usize,
    pub images: &'a dyn ImageSource,
    /// When set, workers stop taking new samples; unfinished samples are
    /// left out of the report.
    pub cancel: Option<&'a AtomicBool>,
    pub on_record: Option<RecordSink<'a>>,
}

impl Default for EvalOptions<'_> {
    fn default() -> Self {
        Self { parallelism: 1, images: &FileImages, cancel: None, on_record: None }
    }
}

/// Grounds every sample and scores the final point against its ground-truth
/// box. Backend or image failures count as misses and are flagged on the
/// record. Records are sorted by id before aggregation, so the report does
/// not depend on worker count or input order.
pub fn evaluate(
    samples: &[Sample],
    cfg: &EngineConfig,
    provider: &dyn BackendProvider,
    opts: &EvalOptions<'_>,
) -> Result<EvalReport, EvalError> {
    if opts.parallelism == 0 {
        return Err(EvalError::Parallelism);
    }
    let started = Instant::now();
    let next = AtomicUsize::new(0);
    let records = Mutex::new(Vec::with_capacity(samples.len()));
    let workers = opts.parallelism.min(samples.len().max(1));

    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if opts.cancel.is_some_and(|c| c.load(Ordering::SeqCst)) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(sample) = samples.get(i) else { break };
                let (record, result) = run_sample(sample, cfg, provider, opts.images);
                if let Some(sink) = opts.on_record {
                    sink(sample, &record, result.as_ref());
                }
                records.lock().unwrap().push(record);
            });
        }
    });

    let records = records.into_inner().unwrap();
    Ok(EvalReport::from_records(records, started.elapsed().as_secs_f64() * 1e3))
}

fn run_sample(
    sample: &Sample,
    cfg: &EngineConfig,
    provider: &dyn BackendProvider,
    images: &dyn ImageSource,
) -> (SampleRecord, Option<GroundingResult>) {
    let started = Instant::now();
    let outcome = images.load(sample).and_then(|img| {
        let backend = provider.backend_for(sample).map_err(|e| e.to_string())?;
        ground(&img, &sample.instruction, cfg, backend.as_ref()).map_err(|e: EngineError| e.to_string())
    });
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    let mut record = SampleRecord {
        id: sample.id.clone(),
        group: sample.group.clone(),
        modality_label: sample.modality_label,
        final_point: None,
        hit: false,
        iterations: 0,
        wall_ms,
        error: None,
    };
    match outcome {
        Ok(result) => {
            record.final_point = Some(result.final_point);
            record.hit = point_in_box(&result.final_point, &sample.gt_box);
            record.iterations = result.iterations();
            (record, Some(result))
        }
        Err(e) => {
            record.error = Some(e);
            (record, None)
        }
    }
}
