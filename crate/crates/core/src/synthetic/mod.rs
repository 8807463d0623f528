//! Synthetic screens, oracle backends with a parametric error model, and the
//! Monte-Carlo suite that runs engine configurations against them.

use thiserror::Error;

use crate::eval::EvalError;

mod generate;
mod oracle;
mod suite;

pub use generate::{generate_screen, render_screen, ElementKind, GenConfig, SynthElement, SynthScreen};
pub use oracle::{stream_for, BlankScreens, OracleBackend, OracleConfig, OracleProvider, RenderedScreens, ScreenMap};
pub use suite::{
    build_samples, load_screens, run_synthetic_suite, screen_seed, write_synth_dir, SuiteEntry, SuiteSpec,
    SyntheticReport, SyntheticSet,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    Config(String),
    #[error("no feasible layout for seed {seed} after {attempts} attempts")]
    Infeasible { seed: u64, attempts: u32 },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("image error: {0}")]
    Image(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
