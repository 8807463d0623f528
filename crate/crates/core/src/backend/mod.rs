//! Model abstraction: the two capabilities the grounding engine needs from a
//! vision-language model (predict a point, choose between two candidates),
//! plus concrete HTTP and scripted implementations.

use std::io::Cursor;
use std::sync::Arc;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Region, Size};

mod config;
mod http;
mod parse;
mod prompt;
mod scripted;
pub mod wire;

pub use crate::geometry::CoordConvention;
pub use config::{BackendConfig, BackendKind};
pub use http::HttpBackend;
pub use parse::{parse_choice, parse_point, NEGATIVE_CORPUS, POSITIVE_CORPUS};
pub use prompt::PromptTemplates;
pub use scripted::{Script, ScriptQueue, ScriptedBackend};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("could not parse model output: {raw:?}")]
    ParseFailure { raw: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("scripted backend exhausted its {0} queue")]
    ScriptExhausted(&'static str),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("image encoding failed: {0}")]
    Image(String),
}

impl BackendError {
    pub fn parse_failure(raw: impl Into<String>) -> Self {
        Self::ParseFailure { raw: raw.into() }
    }

    pub fn is_parse_failure(&self) -> bool {
        matches!(self, Self::ParseFailure { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModalityTag {
    Text,
    Icon,
    Generic,
}

impl ModalityTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Text => "text",
            Self::Icon => "icon",
            Self::Generic => "generic",
        }
    }
}

/// One answer from `predict`. `point` is in the local pixel frame of the
/// submitted crop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub point: Point,
    pub raw_text: String,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    TextCandidate,
    IconCandidate,
}

/// How a [`Choice`] came about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceSource {
    Model,
    /// Candidates were too close to need a model call.
    Skipped,
    /// The model answer could not be used.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub candidate: Candidate,
    pub raw_text: String,
    pub source: ChoiceSource,
}

/// A rectangular view into a screenshot, the unit of work sent to a model.
#[derive(Debug, Clone, Copy)]
pub struct ImageCrop<'a> {
    image: &'a RgbImage,
    region: Region,
}

impl<'a> ImageCrop<'a> {
    /// Panics if `region` is not contained in the image.
    pub fn new(image: &'a RgbImage, region: Region) -> Self {
        assert!(
            region.right() <= image.width() as u64 && region.bottom() <= image.height() as u64,
            "crop region {region} exceeds {}x{} image",
            image.width(),
            image.height()
        );
        Self { image, region }
    }

    pub fn full(image: &'a RgbImage) -> Self {
        let region = Region { x: 0, y: 0, width: image.width(), height: image.height() };
        Self { image, region }
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn size(&self) -> Size {
        self.region.size()
    }

    pub fn to_image(&self) -> RgbImage {
        let r = self.region;
        image::imageops::crop_imm(self.image, r.x, r.y, r.width, r.height).to_image()
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, BackendError> {
        encode_png(&self.to_image())
    }
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>, BackendError> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .map_err(|e| BackendError::Image(e.to_string()))?;
    Ok(buf.into_inner())
}

/// A vision-language model as seen by the engine. Implementations must
/// tolerate concurrent calls from several evaluation workers.
pub trait Backend: Send + Sync {
    /// Predicts the target point inside `crop`, in the crop's local frame.
    fn predict(
        &self,
        crop: &ImageCrop<'_>,
        instruction: &str,
        modality: ModalityTag,
    ) -> Result<Prediction, BackendError>;

    /// Chooses between the text-pass and icon-pass candidates (full-image
    /// coordinates).
    fn select(
        &self,
        full: &RgbImage,
        instruction: &str,
        text_candidate: Point,
        icon_candidate: Point,
    ) -> Result<Choice, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn predict(&self, crop: &ImageCrop<'_>, instruction: &str, modality: ModalityTag) -> Result<Prediction, BackendError> {
        (**self).predict(crop, instruction, modality)
    }

    fn select(&self, full: &RgbImage, instruction: &str, t: Point, i: Point) -> Result<Choice, BackendError> {
        (**self).select(full, instruction, t, i)
    }
}

/// Validated prediction: rejects empty instructions and clamps the returned
/// point into the crop so no backend can leak an out-of-frame point.
pub fn predict_coordinate(
    backend: &dyn Backend,
    crop: &ImageCrop<'_>,
    instruction: &str,
    modality: ModalityTag,
) -> Result<Prediction, BackendError> {
    if instruction.trim().is_empty() {
        return Err(BackendError::InvalidRequest("instruction is empty".into()));
    }
    let mut pred = backend.predict(crop, instruction, modality)?;
    if !pred.point.is_finite() {
        return Err(BackendError::parse_failure(pred.raw_text));
    }
    pred.point = crop.region().clamp_local(pred.point);
    Ok(pred)
}

/// Validated selection call. Both candidates must lie inside the image.
pub fn select_candidate(
    backend: &dyn Backend,
    full: &RgbImage,
    instruction: &str,
    text_candidate: Point,
    icon_candidate: Point,
) -> Result<Choice, BackendError> {
    let frame = Region { x: 0, y: 0, width: full.width(), height: full.height() };
    for p in [&text_candidate, &icon_candidate] {
        if !frame.contains_point(p) {
            return Err(BackendError::InvalidRequest(format!(
                "candidate ({}, {}) outside {}x{} image",
                p.x, p.y, full.width(), full.height()
            )));
        }
    }
    backend.select(full, instruction, text_candidate, icon_candidate)
}

/// Draws the two selection markers ("A" for the text candidate, "B" for the
/// icon candidate) on a copy of the full screenshot.
pub fn annotate_candidates(full: &RgbImage, text_candidate: Point, icon_candidate: Point) -> RgbImage {
    use crate::raster::{draw_label, draw_marker, Rgb};
    let mut img = full.clone();
    let marks = [(text_candidate, "A", Rgb([230, 40, 40])), (icon_candidate, "B", Rgb([40, 90, 230]))];
    for (p, label, color) in marks {
        draw_marker(&mut img, p.x, p.y, 6, color);
        draw_label(&mut img, p.x as i64 + 9, p.y as i64 - 12, label, color, 2);
    }
    img
}
