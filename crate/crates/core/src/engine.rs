//! Iterative zoom grounding with convergence halting, and the dual-modality
//! pipeline built on top of it.
//!
//! One pass ([`dynamic_grounding`]) repeatedly asks the backend for a point in
//! the current region, maps it to the full-image frame, halts once two
//! consecutive answers agree to within a fraction of the pre-zoom region's
//! diagonal, and otherwise crops a smaller region around the answer. The full
//! pipeline ([`ground`]) runs a text pass and an icon pass and lets the
//! backend pick between the two final points.

use std::collections::BTreeMap;
use std::sync::Arc;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{
    predict_coordinate, select_candidate, Backend, BackendError, Candidate, Choice, ChoiceSource, ImageCrop,
    ModalityTag,
};
use crate::geometry::{
    crop_around, scaled_size, stop_condition_with_ratio, stop_threshold, to_global, GeometryError, Point, Region,
    Size, DEFAULT_CROP_SCALE, DEFAULT_STOP_RATIO,
};

/// Version of the serialized [`TraceDocument`] layout.
pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("invalid engine config: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineMode {
    /// Single generic pass, no zoom.
    Vanilla,
    /// Generic pass with iterative zoom.
    DynamicOnly,
    /// Text and icon passes without zoom, then selection.
    ModalityOnly,
    /// Text and icon passes with zoom, then selection.
    #[default]
    Full,
}

impl EngineMode {
    pub const ALL: [EngineMode; 4] = [Self::Vanilla, Self::DynamicOnly, Self::ModalityOnly, Self::Full];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Vanilla => "vanilla",
            Self::DynamicOnly => "dynamic_only",
            Self::ModalityOnly => "modality_only",
            Self::Full => "full",
        }
    }

    pub fn zooms(&self) -> bool {
        matches!(self, Self::DynamicOnly | Self::Full)
    }

    pub fn decouples(&self) -> bool {
        matches!(self, Self::ModalityOnly | Self::Full)
    }
}

impl std::str::FromStr for EngineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "vanilla" => Ok(Self::Vanilla),
            "dynamic_only" | "dg" => Ok(Self::DynamicOnly),
            "modality_only" | "md" => Ok(Self::ModalityOnly),
            "full" => Ok(Self::Full),
            other => Err(format!("unknown engine mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub max_iters: u32,
    pub crop_scale: f64,
    pub stop_ratio: f64,
    pub min_region_side: u32,
    pub mode: EngineMode,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            max_iters: 7,
            crop_scale: DEFAULT_CROP_SCALE,
            stop_ratio: DEFAULT_STOP_RATIO,
            min_region_side: 256,
            mode: EngineMode::Full,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.max_iters < 1 {
            return Err(EngineError::Config("max_iters must be at least 1".into()));
        }
        if !(self.crop_scale > 0.0 && self.crop_scale < 1.0) {
            return Err(EngineError::Config(format!("crop_scale must lie in (0, 1), got {}", self.crop_scale)));
        }
        if !(self.stop_ratio > 0.0 && self.stop_ratio < 1.0) {
            return Err(EngineError::Config(format!("stop_ratio must lie in (0, 1), got {}", self.stop_ratio)));
        }
        if self.min_region_side < 1 {
            return Err(EngineError::Config("min_region_side must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_mode(&self, mode: EngineMode) -> Self {
        Self { mode, ..self.clone() }
    }

    /// Config for a sweep point `v` of the zoom-count ablation: `v` zoom steps
    /// means `v + 1` predictions.
    pub fn for_sweep(&self, zooms: u32) -> Self {
        Self { max_iters: zooms + 1, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
    ParseFallback,
    RegionFloor,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: u32,
    pub region: Region,
    pub prediction_local: Point,
    pub prediction_global: Point,
    pub raw_text: String,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingTrace {
    pub modality: ModalityTag,
    pub iterations: Vec<IterationRecord>,
    pub final_point: Point,
}

impl GroundingTrace {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn stop_reason(&self) -> StopReason {
        self.iterations.last().map_or(StopReason::None, |r| r.stop_reason)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingResult {
    pub mode: EngineMode,
    pub final_point: Point,
    pub traces: Vec<GroundingTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub choice: Option<Choice>,
}

impl GroundingResult {
    pub fn trace(&self, modality: ModalityTag) -> Option<&GroundingTrace> {
        self.traces.iter().find(|t| t.modality == modality)
    }

    pub fn text_trace(&self) -> Option<&GroundingTrace> {
        self.trace(ModalityTag::Text)
    }

    pub fn icon_trace(&self) -> Option<&GroundingTrace> {
        self.trace(ModalityTag::Icon)
    }

    /// Total prediction calls across all passes.
    pub fn iterations(&self) -> usize {
        self.traces.iter().map(GroundingTrace::len).sum()
    }
}

/// One zooming pass.
///
/// A parse failure never aborts the pass: the iteration becomes a no-move
/// (the region center on the first iteration, the previous point
/// afterwards). A no-move after the first iteration ends the pass with
/// [`StopReason::ParseFallback`].
pub fn dynamic_grounding(
    image: &RgbImage,
    instruction: &str,
    modality: ModalityTag,
    cfg: &EngineConfig,
    backend: &dyn Backend,
) -> Result<GroundingTrace, EngineError> {
    cfg.validate()?;
    let size = Size::new(image.width(), image.height())?;
    let mut region = Region::full(size);
    let mut previous: Option<(Point, Region)> = None;
    let mut iterations = Vec::new();

    for t in 1..=cfg.max_iters {
        let crop = ImageCrop::new(image, region);
        let (local, raw_text, parse_failed) = match predict_coordinate(backend, &crop, instruction, modality) {
            Ok(p) => (p.point, p.raw_text, false),
            Err(BackendError::ParseFailure { raw }) => {
                let local = match previous {
                    None => region.clamp_local(Point::new(region.width as f64 / 2.0, region.height as f64 / 2.0)),
                    Some((prev, _)) => {
                        let o = region.origin::<f64>();
                        region.clamp_local(Point::new(prev.x - o.x, prev.y - o.y))
                    }
                };
                (local, raw, true)
            }
            Err(e) => return Err(e.into()),
        };
        let global = to_global(&region, local);

        let converged = previous
            .map(|(prev, prev_region)| stop_condition_with_ratio(&prev, &global, &prev_region, cfg.stop_ratio))
            .unwrap_or(false);
        let stop_reason = if parse_failed && t > 1 {
            StopReason::ParseFallback
        } else if converged {
            StopReason::Converged
        } else if t == cfg.max_iters {
            if parse_failed {
                StopReason::ParseFallback
            } else {
                StopReason::MaxIters
            }
        } else if scaled_size(region.size(), cfg.crop_scale).min_side() < cfg.min_region_side {
            StopReason::RegionFloor
        } else {
            StopReason::None
        };

        iterations.push(IterationRecord {
            index: t,
            region,
            prediction_local: local,
            prediction_global: global,
            raw_text,
            stop_reason,
        });
        if stop_reason != StopReason::None {
            break;
        }
        previous = Some((global, region));
        region = crop_around(&region, global, cfg.crop_scale)?;
    }

    let final_point = iterations.last().map(|r| r.prediction_global).expect("max_iters >= 1");
    Ok(GroundingTrace { modality, iterations, final_point })
}

/// Runs the pipeline selected by `cfg.mode`.
pub fn ground(
    image: &RgbImage,
    instruction: &str,
    cfg: &EngineConfig,
    backend: &dyn Backend,
) -> Result<GroundingResult, EngineError> {
    cfg.validate()?;
    let pass_cfg = if cfg.mode.zooms() { cfg.clone() } else { EngineConfig { max_iters: 1, ..cfg.clone() } };

    if !cfg.mode.decouples() {
        let trace = dynamic_grounding(image, instruction, ModalityTag::Generic, &pass_cfg, backend)?;
        return Ok(GroundingResult { mode: cfg.mode, final_point: trace.final_point, traces: vec![trace], choice: None });
    }

    let text = dynamic_grounding(image, instruction, ModalityTag::Text, &pass_cfg, backend)?;
    let icon = dynamic_grounding(image, instruction, ModalityTag::Icon, &pass_cfg, backend)?;
    let choice = choose(image, instruction, cfg, backend, text.final_point, icon.final_point)?;
    let final_point = match choice.candidate {
        Candidate::TextCandidate => text.final_point,
        Candidate::IconCandidate => icon.final_point,
    };
    Ok(GroundingResult { mode: cfg.mode, final_point, traces: vec![text, icon], choice: Some(choice) })
}

/// Candidates that already agree to within the full-image convergence
/// distance skip the model call and resolve to the text candidate, as does
/// an unparseable answer.
fn choose(
    image: &RgbImage,
    instruction: &str,
    cfg: &EngineConfig,
    backend: &dyn Backend,
    text: Point,
    icon: Point,
) -> Result<Choice, EngineError> {
    let full = Region::full(Size::new(image.width(), image.height())?);
    if text.distance(&icon) < stop_threshold(&full, cfg.stop_ratio) {
        return Ok(Choice { candidate: Candidate::TextCandidate, raw_text: String::new(), source: ChoiceSource::Skipped });
    }
    match select_candidate(backend, image, instruction, text, icon) {
        Ok(choice) => Ok(choice),
        Err(BackendError::ParseFailure { raw }) => {
            Ok(Choice { candidate: Candidate::TextCandidate, raw_text: raw, source: ChoiceSource::Fallback })
        }
        Err(e) => Err(e.into()),
    }
}

/// Results of running every engine mode, plus an optional zoom-count sweep,
/// on one input.
#[derive(Debug, Clone)]
pub struct AblationRun {
    pub modes: BTreeMap<EngineMode, Result<GroundingResult, EngineError>>,
    /// `(zoom steps, result)`; zoom steps `v` runs with `max_iters = v + 1`.
    pub sweep: Vec<(u32, Result<GroundingResult, EngineError>)>,
}

/// Runs all four modes (and the sweep, if given) on identical inputs. Each
/// run gets a fresh backend from `make_backend` so stateful backends replay
/// identically. A failing run is recorded and the rest still execute.
pub fn run_ablation(
    image: &RgbImage,
    instruction: &str,
    make_backend: &dyn Fn() -> Result<Arc<dyn Backend>, BackendError>,
    base_cfg: &EngineConfig,
    sweep: Option<std::ops::RangeInclusive<u32>>,
) -> AblationRun {
    let run = |cfg: &EngineConfig| -> Result<GroundingResult, EngineError> {
        let backend = make_backend()?;
        ground(image, instruction, cfg, backend.as_ref())
    };
    let modes = EngineMode::ALL.iter().map(|m| (*m, run(&base_cfg.with_mode(*m)))).collect();
    let sweep = sweep
        .into_iter()
        .flatten()
        .map(|v| (v, run(&base_cfg.for_sweep(v))))
        .collect();
    AblationRun { modes, sweep }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub width: u32,
    pub height: u32,
}

/// Self-describing record of one grounding episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub schema_version: u32,
    pub instruction: String,
    pub image: ImageInfo,
    pub config: EngineConfig,
    pub result: GroundingResult,
}

impl TraceDocument {
    pub fn new(instruction: &str, image: &RgbImage, config: &EngineConfig, result: GroundingResult) -> Self {
        Self {
            schema_version: TRACE_SCHEMA_VERSION,
            instruction: instruction.to_string(),
            image: ImageInfo { width: image.width(), height: image.height() },
            config: config.clone(),
            result,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace documents serialize")
    }
}
