use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dimo::backend::BackendKind;
use dimo::engine::EngineMode;
use dimo::geometry::CoordConvention;

#[derive(Debug, Parser)]
#[command(name = "dimo", version, about = "Iterative-zoom GUI grounding over vision-language backends")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ground one instruction on one screenshot and print the result as JSON.
    Ground(GroundArgs),
    /// Evaluate a dataset manifest and write reports.
    Eval(EvalArgs),
    /// Evaluate a manifest under several engine modes or iteration limits.
    Ablate(AblateArgs),
    /// Generate a synthetic screen set with a manifest.
    Synth(SynthArgs),
    /// Print the effective configuration after merging file and flags.
    Config(ConfigArgs),
}

/// Flags shared by every command. Each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML config file; falls back to $DIMO_CONFIG.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_from_str::<BackendKind>)]
    pub backend: Option<BackendKind>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Coordinate frame of model answers: pixels, norm01 or norm1000.
    #[arg(long, value_parser = parse_from_str::<CoordConvention>)]
    pub convention: Option<CoordConvention>,
    #[arg(long)]
    pub max_iters: Option<u32>,
    /// vanilla, dynamic_only, modality_only or full.
    #[arg(long, value_parser = parse_from_str::<EngineMode>)]
    pub mode: Option<EngineMode>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Oracle seed; for `synth`, the generation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Script of canned answers for the mock backend (JSON).
    #[arg(long)]
    pub script: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GroundArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub instruction: String,
    /// Write an annotated PNG of the zoom trace here.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// native, screenspot or screenspot-pro.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub images_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Write per-sample traces and overlay PNGs.
    #[arg(long)]
    pub overlay: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Sweep values `a..b` (inclusive) or `a,b,c`; value v runs with max_iters v+1.
    #[arg(long)]
    pub sweep_iters: Option<String>,
    /// `all` or a comma-separated list of modes.
    #[arg(long)]
    pub modes: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub distractor_rate: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[command(flatten)]
    pub common: Common,
}

fn parse_from_str<T: std::str::FromStr<Err = String>>(s: &str) -> Result<T, String> {
    s.parse()
}

/// Parses `a..b` (inclusive), `a,b,c` or a single value.
pub fn parse_sweep(spec: &str) -> Result<Vec<u32>, String> {
    let num = |s: &str| s.trim().parse::<u32>().map_err(|_| format!("bad sweep value `{}`", s.trim()));
    let values = match spec.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
            if a > b {
                return Err(format!("empty sweep range `{spec}`"));
            }
            (a..=b).collect()
        }
        None => spec.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
    };
    if values.iter().any(|v| *v >= 64) {
        return Err("sweep values must be below 64".into());
    }
    Ok(values)
}

pub fn parse_modes(spec: &str) -> Result<Vec<EngineMode>, String> {
    if spec.trim() == "all" {
        return Ok(EngineMode::ALL.to_vec());
    }
    spec.split(',').map(|s| s.trim().parse()).collect()
}
