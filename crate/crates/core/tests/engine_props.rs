use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use dimo::backend::{Backend, BackendError, Candidate, Choice, ChoiceSource, ImageCrop, ModalityTag, Prediction};
use dimo::engine::{ground, EngineConfig, EngineMode, StopReason};
use dimo::geometry::{scaled_size, stop_condition_with_ratio, to_global, Point, Region, Size};
use image::RgbImage;
use proptest::prelude::*;

/// Answers with fractions of the current crop, repeating the last one when
/// the list runs out.
struct ListBackend {
    points: Mutex<VecDeque<(f64, f64)>>,
    last: Mutex<(f64, f64)>,
    pick_icon: bool,
    calls: AtomicUsize,
}

impl ListBackend {
    fn new(points: Vec<(f64, f64)>, pick_icon: bool) -> Self {
        Self { points: Mutex::new(points.into()), last: Mutex::new((0.5, 0.5)), pick_icon, calls: AtomicUsize::new(0) }
    }
}

impl Backend for ListBackend {
    fn predict(&self, crop: &ImageCrop<'_>, _: &str, _: ModalityTag) -> Result<Prediction, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mut last = self.last.lock().unwrap();
        if let Some(p) = self.points.lock().unwrap().pop_front() {
            *last = p;
        }
        let s = crop.size();
        let point = Point::new(last.0 * s.width as f64, last.1 * s.height as f64);
        Ok(Prediction { point, raw_text: String::new(), latency_ms: 0.0 })
    }

    fn select(&self, _: &RgbImage, _: &str, _: Point, _: Point) -> Result<Choice, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let candidate = if self.pick_icon { Candidate::IconCandidate } else { Candidate::TextCandidate };
        Ok(Choice { candidate, raw_text: String::new(), source: ChoiceSource::Model })
    }
}

fn mode() -> impl Strategy<Value = EngineMode> {
    prop_oneof![
        Just(EngineMode::Vanilla),
        Just(EngineMode::DynamicOnly),
        Just(EngineMode::ModalityOnly),
        Just(EngineMode::Full)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 400, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn traces_satisfy_engine_invariants(
        w in 16u32..2400,
        h in 16u32..1600,
        max_iters in 1u32..9,
        min_region_side in 1u32..300,
        stop_ratio in 0.02f64..0.5,
        points in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 0..20),
        pick_icon in any::<bool>(),
        mode in mode(),
    ) {
        let img = RgbImage::new(w, h);
        let cfg = EngineConfig { max_iters, min_region_side, stop_ratio, mode, ..EngineConfig::default() };
        let backend = ListBackend::new(points, pick_icon);
        let result = ground(&img, "click", &cfg, &backend).unwrap();
        let frame = Region::full(Size::new(w, h).unwrap());
        let pass_limit = if mode.zooms() { max_iters as usize } else { 1 };

        prop_assert!(backend.calls.load(Ordering::SeqCst) <= 2 * max_iters as usize + 1);
        prop_assert_eq!(result.traces.len(), if mode.decouples() { 2 } else { 1 });
        prop_assert!(frame.contains_point(&result.final_point));

        for trace in &result.traces {
            prop_assert!(!trace.is_empty() && trace.len() <= pass_limit);
            prop_assert_eq!(trace.final_point, trace.iterations.last().unwrap().prediction_global);
            for (k, rec) in trace.iterations.iter().enumerate() {
                prop_assert_eq!(rec.index as usize, k + 1);
                prop_assert_eq!(rec.prediction_global, to_global(&rec.region, rec.prediction_local));
                prop_assert!(frame.contains_point(&rec.prediction_global));
                let last = k + 1 == trace.len();
                prop_assert_eq!(rec.stop_reason == StopReason::None, !last);
                if k > 0 {
                    let prev = &trace.iterations[k - 1];
                    prop_assert!(prev.region.contains_region(&rec.region));
                    prop_assert_eq!(rec.region.size(), scaled_size(prev.region.size(), cfg.crop_scale));
                    let converged = stop_condition_with_ratio(&prev.prediction_global, &rec.prediction_global, &prev.region, stop_ratio);
                    prop_assert_eq!(rec.stop_reason == StopReason::Converged, converged);
                } else {
                    prop_assert!(rec.stop_reason != StopReason::Converged);
                }
            }
        }

        match mode {
            EngineMode::Vanilla | EngineMode::DynamicOnly => {
                prop_assert_eq!(result.traces[0].modality, ModalityTag::Generic);
                prop_assert!(result.choice.is_none());
            }
            EngineMode::ModalityOnly | EngineMode::Full => {
                let choice = result.choice.as_ref().unwrap();
                let (text, icon) = (result.text_trace().unwrap(), result.icon_trace().unwrap());
                let expected = match choice.candidate {
                    Candidate::TextCandidate => text.final_point,
                    Candidate::IconCandidate => icon.final_point,
                };
                prop_assert_eq!(result.final_point, expected);
            }
        }
    }

    #[test]
    fn grounding_is_deterministic(
        points in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..16),
        mode in mode(),
    ) {
        let img = RgbImage::new(1280, 720);
        let cfg = EngineConfig { mode, min_region_side: 16, ..EngineConfig::default() };
        let a = ground(&img, "x", &cfg, &ListBackend::new(points.clone(), true)).unwrap();
        let b = ground(&img, "x", &cfg, &ListBackend::new(points, true)).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
