//! Training-free GUI grounding.
//!
//! Given a screenshot and a natural-language instruction, the engine asks a
//! vision-language backend for a click point, zooms in around the answer and
//! asks again until consecutive answers agree. Text-oriented and icon-oriented
//! passes run separately and the backend picks between their results.
//!
//! Modules:
//! - [`geometry`]: regions, crops, frame transforms and the convergence test.
//! - [`backend`]: the model interface, HTTP clients, output parsing, scripts.
//! - [`engine`]: the zoom loop, the four ablation modes and trace documents.
//! - [`eval`]: dataset manifests, parallel evaluation, reports and overlays.
//! - [`synthetic`]: generated screens and oracle backends for verification.

pub mod backend;
pub mod engine;
pub mod eval;
pub mod geometry;
pub mod raster;
pub mod scalar;
pub mod synthetic;

pub use backend::{Backend, BackendConfig, BackendError, BackendKind, Candidate, Choice, ModalityTag, Prediction};
pub use engine::{ground, EngineConfig, EngineError, EngineMode, GroundingResult, GroundingTrace, StopReason};
pub use geometry::{CoordConvention, Region, Size};
pub use scalar::Scalar;

/// Point in image pixels at the default precision.
pub type Point = geometry::Point<f64>;
pub type Point32 = geometry::Point<f32>;
pub type Point64 = geometry::Point<f64>;
