use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{render_screen, SynthError, SynthScreen};
use crate::backend::{Backend, BackendError, Candidate, Choice, ChoiceSource, ImageCrop, ModalityTag, Prediction};
use crate::eval::{BackendProvider, ImageSource, Sample};
use crate::geometry::Point;

/// Error model of the oracle backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Per-axis noise σ as a fraction of the current region's diagonal.
    pub noise_alpha: f64,
    /// Probability that a text or generic prediction aims at the distractor.
    pub distractor_bias: f64,
    pub seed: u64,
    /// Probability that selection picks the farther candidate.
    pub selection_error_rate: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { noise_alpha: 0.0, distractor_bias: 0.0, seed: 0, selection_error_rate: 0.0 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.noise_alpha >= 0.0 && self.noise_alpha.is_finite()) {
            return Err(SynthError::Config(format!("noise_alpha must be >= 0, got {}", self.noise_alpha)));
        }
        for (name, p) in [("distractor_bias", self.distractor_bias), ("selection_error_rate", self.selection_error_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// Stream id for a sample: the first 8 bytes of SHA-256 of its id.
pub fn stream_for(id: &str) -> u64 {
    let digest = Sha256::digest(id.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Synthetic model that knows the answer. Every call consumes the same number
/// of random draws whatever the configuration, so runs that share a seed and
/// differ only in `noise_alpha` see paired noise.
#[derive(Debug)]
pub struct OracleBackend {
    target: Point,
    distractor: Option<Point>,
    cfg: OracleConfig,
    rng: Mutex<ChaCha8Rng>,
}

impl OracleBackend {
    pub fn new(screen: &SynthScreen, cfg: &OracleConfig) -> Self {
        Self::with_stream(screen, cfg, 0)
    }

    /// Independent random stream under the same seed.
    pub fn with_stream(screen: &SynthScreen, cfg: &OracleConfig, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        Self {
            target: screen.target().center(),
            distractor: screen.distractor().map(|d| d.center()),
            cfg: cfg.clone(),
            rng: Mutex::new(rng),
        }
    }
}

impl Backend for OracleBackend {
    fn predict(&self, crop: &ImageCrop<'_>, _: &str, modality: ModalityTag) -> Result<Prediction, BackendError> {
        let (u, nx, ny): (f64, f64, f64) = {
            let mut rng = self.rng.lock().unwrap();
            (rng.gen(), rng.sample(StandardNormal), rng.sample(StandardNormal))
        };
        let aim = match (modality, self.distractor) {
            (ModalityTag::Text | ModalityTag::Generic, Some(d)) if u < self.cfg.distractor_bias => d,
            _ => self.target,
        };
        let region = crop.region();
        let sigma = self.cfg.noise_alpha * region.diagonal::<f64>();
        let global = region.clamp_global(Point::new(aim.x + sigma * nx, aim.y + sigma * ny));
        let o = region.origin::<f64>();
        let local = Point::new(global.x - o.x, global.y - o.y);
        Ok(Prediction { point: local, raw_text: format!("({:.3}, {:.3})", local.x, local.y), latency_ms: 0.0 })
    }

    fn select(&self, _: &RgbImage, _: &str, text: Point, icon: Point) -> Result<Choice, BackendError> {
        let u: f64 = self.rng.lock().unwrap().gen();
        let icon_closer = icon.distance(&self.target) < text.distance(&self.target);
        let pick_icon = icon_closer != (u < self.cfg.selection_error_rate);
        let (candidate, raw) = if pick_icon {
            (Candidate::IconCandidate, "Answer: B")
        } else {
            (Candidate::TextCandidate, "Answer: A")
        };
        Ok(Choice { candidate, raw_text: raw.into(), source: ChoiceSource::Model })
    }
}

/// Screens keyed by sample id.
pub type ScreenMap = HashMap<String, Arc<SynthScreen>>;

/// Builds a fresh oracle for each sample from its screen, seeded on the
/// sample id so results do not depend on scheduling.
pub struct OracleProvider {
    screens: Arc<ScreenMap>,
    cfg: OracleConfig,
}

impl OracleProvider {
    pub fn new(screens: Arc<ScreenMap>, cfg: OracleConfig) -> Result<Self, SynthError> {
        cfg.validate()?;
        Ok(Self { screens, cfg })
    }
}

impl BackendProvider for OracleProvider {
    fn backend_for(&self, sample: &Sample) -> Result<Arc<dyn Backend>, BackendError> {
        let screen = self
            .screens
            .get(&sample.id)
            .ok_or_else(|| BackendError::InvalidRequest(format!("no synthetic screen for sample `{}`", sample.id)))?;
        Ok(Arc::new(OracleBackend::with_stream(screen, &self.cfg, stream_for(&sample.id))))
    }
}

/// Renders screens on demand instead of reading PNGs from disk.
pub struct RenderedScreens(pub Arc<ScreenMap>);

impl ImageSource for RenderedScreens {
    fn load(&self, sample: &Sample) -> Result<Arc<RgbImage>, String> {
        self.0
            .get(&sample.id)
            .map(|s| Arc::new(render_screen(s)))
            .ok_or_else(|| format!("no synthetic screen for sample `{}`", sample.id))
    }
}

/// Unpainted canvases of each screen's size. Enough for oracle backends,
/// which never look at pixels, and far cheaper than rendering.
pub struct BlankScreens(pub Arc<ScreenMap>);

impl ImageSource for BlankScreens {
    fn load(&self, sample: &Sample) -> Result<Arc<RgbImage>, String> {
        self.0
            .get(&sample.id)
            .map(|s| Arc::new(RgbImage::new(s.size.width, s.size.height)))
            .ok_or_else(|| format!("no synthetic screen for sample `{}`", sample.id))
    }
}
