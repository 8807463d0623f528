use std::collections::{BTreeMap, VecDeque};
use std::sync::Mutex;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::{parse_choice, parse_point, Backend, BackendError, Choice, ChoiceSource, ImageCrop, ModalityTag, Prediction};
use crate::geometry::{CoordConvention, Point};

/// Canned model answers, consumed front to back.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptQueue {
    pub predict: Vec<String>,
    pub select: Vec<String>,
}

/// Script file for the mock backend. `by_instruction` entries override the
/// default queues for matching instructions, so each evaluation sample can
/// replay its own answers regardless of scheduling.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Script {
    pub convention: CoordConvention,
    pub predict: Vec<String>,
    pub select: Vec<String>,
    pub by_instruction: BTreeMap<String, ScriptQueue>,
}

impl Script {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Fresh backend replaying the queue that applies to `instruction`.
    pub fn backend_for(&self, instruction: &str) -> ScriptedBackend {
        let queue = self
            .by_instruction
            .get(instruction)
            .cloned()
            .unwrap_or_else(|| ScriptQueue { predict: self.predict.clone(), select: self.select.clone() });
        ScriptedBackend::new(self.convention, queue)
    }
}

/// Replays model text in call order. Predictions go through the same parser
/// as real model output, so unparseable entries surface as parse failures.
#[derive(Debug)]
pub struct ScriptedBackend {
    convention: CoordConvention,
    predict: Mutex<VecDeque<String>>,
    select: Mutex<VecDeque<String>>,
}

impl ScriptedBackend {
    pub fn new(convention: CoordConvention, queue: ScriptQueue) -> Self {
        Self {
            convention,
            predict: Mutex::new(queue.predict.into()),
            select: Mutex::new(queue.select.into()),
        }
    }

    pub fn remaining_predictions(&self) -> usize {
        self.predict.lock().unwrap().len()
    }
}

impl Backend for ScriptedBackend {
    fn predict(&self, crop: &ImageCrop<'_>, _: &str, _: ModalityTag) -> Result<Prediction, BackendError> {
        let raw = self.predict.lock().unwrap().pop_front().ok_or(BackendError::ScriptExhausted("predict"))?;
        let point = parse_point(&raw, self.convention, crop.size())?;
        Ok(Prediction { point, raw_text: raw, latency_ms: 0.0 })
    }

    fn select(&self, _: &RgbImage, _: &str, _: Point, _: Point) -> Result<Choice, BackendError> {
        let raw = self.select.lock().unwrap().pop_front().ok_or(BackendError::ScriptExhausted("select"))?;
        let candidate = parse_choice(&raw)?;
        Ok(Choice { candidate, raw_text: raw, source: ChoiceSource::Model })
    }
}
