//! Run configuration: built-in defaults, then a TOML file, then flags.

use std::path::{Path, PathBuf};

use dimo::backend::BackendConfig;
use dimo::engine::EngineConfig;
use dimo::eval::FormatConfig;
use dimo::synthetic::{GenConfig, OracleConfig};
use serde::{Deserialize, Serialize};

use crate::args::Common;
use crate::CliError;

pub const CONFIG_ENV: &str = "DIMO_CONFIG";
pub const TOKEN_ENV: &str = "DIMO_API_TOKEN";

/// Dataset layout: a preset name or a full field mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FormatSpec {
    Preset(String),
    Custom(FormatConfig),
}

impl Default for FormatSpec {
    fn default() -> Self {
        Self::Preset("native".into())
    }
}

impl FormatSpec {
    pub fn resolve(&self) -> Result<FormatConfig, CliError> {
        match self {
            Self::Preset(name) => FormatConfig::preset(name).ok_or_else(|| {
                CliError::Config(format!("unknown dataset format `{name}` (expected native, screenspot or screenspot-pro)"))
            }),
            Self::Custom(f) => Ok(f.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub parallelism: usize,
    pub out: PathBuf,
    /// Write per-sample trace JSON and overlay PNGs.
    pub overlay: bool,
    pub format: FormatSpec,
    pub images_dir: Option<PathBuf>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            parallelism: 1,
            out: PathBuf::from("dimo-out"),
            overlay: false,
            format: FormatSpec::default(),
            images_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub engine: EngineConfig,
    pub backend: BackendConfig,
    pub eval: EvalSection,
    pub oracle: OracleConfig,
    pub synth: GenConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", origin.display())))
    }

    /// Defaults, overlaid by the config file (`--config`, else `DIMO_CONFIG`),
    /// overlaid by flags. Callers apply command-specific overrides and then
    /// [`validate`](Self::validate).
    pub fn load(common: &Common) -> Result<Self, CliError> {
        let path = common.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
                Self::from_toml(&text, &p)?
            }
            None => Self::default(),
        };
        cfg.apply(common);
        if let Ok(token) = std::env::var(TOKEN_ENV) {
            if !token.is_empty() {
                cfg.backend.api_token = Some(token);
            }
        }
        Ok(cfg)
    }

    fn apply(&mut self, c: &Common) {
        if let Some(v) = c.backend {
            self.backend.kind = v;
        }
        if let Some(v) = &c.endpoint {
            self.backend.endpoint = v.clone();
        }
        if let Some(v) = &c.model {
            self.backend.model = v.clone();
        }
        if let Some(v) = c.convention {
            self.backend.convention = v;
        }
        if let Some(v) = c.max_iters {
            self.engine.max_iters = v;
        }
        if let Some(v) = c.mode {
            self.engine.mode = v;
        }
        if let Some(v) = c.parallelism {
            self.eval.parallelism = v;
        }
        if let Some(v) = &c.out {
            self.eval.out = v.clone();
        }
        if let Some(v) = c.seed {
            self.oracle.seed = v;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let config = |e: String| CliError::Config(e);
        self.engine.validate().map_err(|e| config(e.to_string()))?;
        self.backend.validate().map_err(|e| config(e.to_string()))?;
        self.oracle.validate().map_err(|e| config(e.to_string()))?;
        self.synth.validate().map_err(|e| config(e.to_string()))?;
        self.eval.format.resolve()?;
        if self.eval.parallelism == 0 {
            return Err(config("parallelism must be at least 1".into()));
        }
        Ok(())
    }

    pub fn format(&self) -> Result<FormatConfig, CliError> {
        let mut f = self.eval.format.resolve()?;
        if let Some(dir) = &self.eval.images_dir {
            f.images_dir = Some(dir.clone());
        }
        Ok(f)
    }
}
