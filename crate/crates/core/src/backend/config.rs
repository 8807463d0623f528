use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, PromptTemplates};
use crate::geometry::CoordConvention;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BackendKind {
    /// Replays a script of canned answers.
    #[default]
    #[serde(rename = "mock")]
    Mock,
    #[serde(rename = "native-http")]
    NativeHttp,
    #[serde(rename = "openai-compat")]
    OpenAiCompat,
    /// Synthetic oracle driven by the layout stored with each synthetic sample.
    #[serde(rename = "oracle")]
    Oracle,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(Self::Mock),
            "native-http" => Ok(Self::NativeHttp),
            "openai-compat" => Ok(Self::OpenAiCompat),
            "oracle" => Ok(Self::Oracle),
            other => Err(format!("unknown backend kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: String,
    pub model: String,
    /// Frame the model answers in (openai-compat and mock). The native
    /// protocol reports its convention per response.
    pub convention: CoordConvention,
    pub prompts: PromptTemplates,
    pub timeout_ms: u64,
    pub retries: u32,
    pub retry_backoff_ms: u64,
    #[serde(skip_serializing)]
    pub api_token: Option<String>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint: "http://127.0.0.1:8000".into(),
            model: String::new(),
            convention: CoordConvention::Pixels,
            prompts: PromptTemplates::default(),
            timeout_ms: 60_000,
            retries: 2,
            retry_backoff_ms: 500,
            api_token: None,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.timeout_ms == 0 {
            return Err(BackendError::InvalidRequest("timeout_ms must be positive".into()));
        }
        if matches!(self.kind, BackendKind::NativeHttp | BackendKind::OpenAiCompat) && self.endpoint.trim().is_empty() {
            return Err(BackendError::InvalidRequest("endpoint is required for HTTP backends".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    /// Delay before retry number `attempt` (1-based), doubling each time.
    pub fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.retry_backoff_ms.saturating_mul(1u64 << attempt.saturating_sub(1).min(16)))
    }
}
