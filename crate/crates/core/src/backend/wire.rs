//! Request and response bodies for the two HTTP backend flavors.
//!
//! Native protocol:
//!
//! * `POST /v1/predict` `{"image", "instruction", "modality"}` answered by
//!   `{"x", "y", "convention", "raw"}`
//! * `POST /v1/select` `{"image", "instruction", "candidates": [{"id", "x", "y"}; 2]}`
//!   answered by `{"choice": "text" | "icon", "raw"}`
//! * `GET /v1/health` answered by `{"status": "ok", "model"}`
//!
//! OpenAI-compatible mode posts one user message (prompt text plus the image
//! as a PNG data URL) to `{endpoint}/chat/completions` at temperature 0.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{BackendConfig, BackendError, BackendKind, ModalityTag};
use crate::geometry::{CoordConvention, Point, Size};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub image: String,
    pub instruction: String,
    pub modality: ModalityTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub x: f64,
    pub y: f64,
    pub convention: CoordConvention,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireCandidate {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectRequest {
    pub image: String,
    pub instruction: String,
    pub candidates: Vec<WireCandidate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WireChoice {
    Text,
    Icon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectResponse {
    pub choice: WireChoice,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: Vec<ContentPart>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text { text: String },
    ImageUrl { image_url: ImageUrl },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageUrl {
    pub url: String,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ChatResponseMessage {
    content: Option<ChatContent>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ChatContent {
    Text(String),
    Parts(Vec<ChatContentPart>),
}

#[derive(Debug, Deserialize)]
struct ChatContentPart {
    #[serde(default)]
    text: Option<String>,
}

/// What the caller wants from the model.
#[derive(Debug, Clone, Copy)]
pub enum WireCall<'a> {
    Predict { instruction: &'a str, modality: ModalityTag, frame: Size },
    Select { instruction: &'a str, text_candidate: Point, icon_candidate: Point },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireRequest {
    pub url: String,
    pub body: Vec<u8>,
}

fn join(endpoint: &str, path: &str) -> String {
    format!("{}{}", endpoint.trim_end_matches('/'), path)
}

/// Serializes a call into an HTTP request. Output bytes depend only on the
/// inputs.
pub fn build_request(image_png: &[u8], call: &WireCall<'_>, cfg: &BackendConfig) -> Result<WireRequest, BackendError> {
    let image = STANDARD.encode(image_png);
    let (url, body) = match (cfg.kind, call) {
        (BackendKind::NativeHttp, WireCall::Predict { instruction, modality, .. }) => {
            let req = PredictRequest { image, instruction: instruction.to_string(), modality: *modality };
            (join(&cfg.endpoint, "/v1/predict"), serde_json::to_vec(&req))
        }
        (BackendKind::NativeHttp, WireCall::Select { instruction, text_candidate, icon_candidate }) => {
            let req = SelectRequest {
                image,
                instruction: instruction.to_string(),
                candidates: vec![
                    WireCandidate { id: "text".into(), x: text_candidate.x, y: text_candidate.y },
                    WireCandidate { id: "icon".into(), x: icon_candidate.x, y: icon_candidate.y },
                ],
            };
            (join(&cfg.endpoint, "/v1/select"), serde_json::to_vec(&req))
        }
        (BackendKind::OpenAiCompat, call) => {
            let prompt = match call {
                WireCall::Predict { instruction, modality, frame } => cfg.prompts.render_predict(*modality, instruction, *frame),
                WireCall::Select { instruction, text_candidate, icon_candidate } => {
                    cfg.prompts.render_select(instruction, *text_candidate, *icon_candidate)
                }
            };
            let req = ChatRequest {
                model: cfg.model.clone(),
                messages: vec![ChatMessage {
                    role: "user".into(),
                    content: vec![
                        ContentPart::Text { text: prompt },
                        ContentPart::ImageUrl { image_url: ImageUrl { url: format!("data:image/png;base64,{image}") } },
                    ],
                }],
                temperature: 0.0,
            };
            (join(&cfg.endpoint, "/chat/completions"), serde_json::to_vec(&req))
        }
        (kind, _) => {
            return Err(BackendError::InvalidRequest(format!("backend kind {kind:?} has no wire protocol")));
        }
    };
    let body = body.map_err(|e| BackendError::Protocol(e.to_string()))?;
    Ok(WireRequest { url, body })
}

pub fn health_url(cfg: &BackendConfig) -> String {
    join(&cfg.endpoint, "/v1/health")
}

fn decode<'de, T: Deserialize<'de>>(body: &'de [u8]) -> Result<T, BackendError> {
    serde_json::from_slice(body).map_err(|e| BackendError::Protocol(format!("malformed response body: {e}")))
}

pub fn parse_predict_response(body: &[u8]) -> Result<PredictResponse, BackendError> {
    decode(body)
}

pub fn parse_select_response(body: &[u8]) -> Result<SelectResponse, BackendError> {
    decode(body)
}

pub fn parse_health_response(body: &[u8]) -> Result<HealthResponse, BackendError> {
    decode(body)
}

/// Assistant text of the first choice of a chat-completion response.
pub fn parse_chat_response(body: &[u8]) -> Result<String, BackendError> {
    let resp: ChatResponse = decode(body)?;
    let first = resp
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| BackendError::Protocol("chat response has no choices".into()))?;
    match first.message.content {
        Some(ChatContent::Text(s)) => Ok(s),
        Some(ChatContent::Parts(parts)) => Ok(parts.into_iter().filter_map(|p| p.text).collect::<Vec<_>>().join("")),
        None => Err(BackendError::Protocol("chat response message has no content".into())),
    }
}
