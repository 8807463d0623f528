use std::thread;
use std::time::Instant;

use image::RgbImage;

use super::wire::{self, WireCall, WireChoice, WireRequest};
use super::{
    annotate_candidates, encode_png, parse_choice, parse_point, Backend, BackendConfig, BackendError, BackendKind,
    Candidate, Choice, ChoiceSource, ImageCrop, ModalityTag, Prediction,
};
use crate::geometry::{denormalize, Point};

/// Backend speaking either the native protocol or an OpenAI-compatible chat
/// API over blocking HTTP.
pub struct HttpBackend {
    cfg: BackendConfig,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend").field("kind", &self.cfg.kind).field("endpoint", &self.cfg.endpoint).finish()
    }
}

enum Failure {
    Retryable(String),
    Fatal(String),
}

impl HttpBackend {
    pub fn new(cfg: BackendConfig) -> Result<Self, BackendError> {
        cfg.validate()?;
        if !matches!(cfg.kind, BackendKind::NativeHttp | BackendKind::OpenAiCompat) {
            return Err(BackendError::InvalidRequest(format!("{:?} is not an HTTP backend kind", cfg.kind)));
        }
        let agent = ureq::AgentBuilder::new().timeout(cfg.timeout()).build();
        Ok(Self { cfg, agent })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.cfg
    }

    fn attempt(&self, req: Option<&WireRequest>, url: &str) -> Result<Vec<u8>, Failure> {
        let call = match req {
            Some(_) => self.agent.post(url).set("Content-Type", "application/json"),
            None => self.agent.get(url),
        };
        let call = match &self.cfg.api_token {
            Some(token) => call.set("Authorization", &format!("Bearer {token}")),
            None => call,
        };
        let result = match req {
            Some(r) => call.send_bytes(&r.body),
            None => call.call(),
        };
        match result {
            Ok(resp) => {
                let mut body = Vec::new();
                std::io::Read::read_to_end(&mut resp.into_reader(), &mut body)
                    .map_err(|e| Failure::Retryable(format!("reading response from {url}: {e}")))?;
                Ok(body)
            }
            Err(ureq::Error::Status(code, resp)) => {
                let detail = resp.into_string().unwrap_or_default();
                let msg = format!("{url} returned HTTP {code}: {}", detail.chars().take(200).collect::<String>());
                if code >= 500 || code == 429 {
                    Err(Failure::Retryable(msg))
                } else {
                    Err(Failure::Fatal(msg))
                }
            }
            Err(ureq::Error::Transport(t)) => Err(Failure::Retryable(format!("{url}: {t}"))),
        }
    }

    /// Sends with up to `retries` additional attempts on transport errors,
    /// 5xx and 429 responses.
    fn send(&self, req: Option<&WireRequest>, url: &str) -> Result<Vec<u8>, BackendError> {
        let mut attempt = 0;
        loop {
            match self.attempt(req, url) {
                Ok(body) => return Ok(body),
                Err(Failure::Fatal(msg)) => return Err(BackendError::Unavailable(msg)),
                Err(Failure::Retryable(msg)) => {
                    if attempt >= self.cfg.retries {
                        return Err(BackendError::Unavailable(format!("{msg} (after {} attempts)", attempt + 1)));
                    }
                    attempt += 1;
                    thread::sleep(self.cfg.backoff(attempt));
                }
            }
        }
    }

    fn post(&self, png: &[u8], call: &WireCall<'_>) -> Result<Vec<u8>, BackendError> {
        let req = wire::build_request(png, call, &self.cfg)?;
        self.send(Some(&req), &req.url)
    }

    /// `GET /v1/health` on a native endpoint.
    pub fn health(&self) -> Result<wire::HealthResponse, BackendError> {
        let url = wire::health_url(&self.cfg);
        let body = self.send(None, &url)?;
        wire::parse_health_response(&body)
    }
}

impl Backend for HttpBackend {
    fn predict(&self, crop: &ImageCrop<'_>, instruction: &str, modality: ModalityTag) -> Result<Prediction, BackendError> {
        let started = Instant::now();
        let png = crop.encode_png()?;
        let frame = crop.size();
        let body = self.post(&png, &WireCall::Predict { instruction, modality, frame })?;
        let (point, raw_text) = match self.cfg.kind {
            BackendKind::NativeHttp => {
                let resp = wire::parse_predict_response(&body)?;
                (denormalize(Point::new(resp.x, resp.y), resp.convention, frame), resp.raw)
            }
            _ => {
                let text = wire::parse_chat_response(&body)?;
                (parse_point(&text, self.cfg.convention, frame)?, text)
            }
        };
        Ok(Prediction { point, raw_text, latency_ms: started.elapsed().as_secs_f64() * 1e3 })
    }

    fn select(&self, full: &RgbImage, instruction: &str, text_candidate: Point, icon_candidate: Point) -> Result<Choice, BackendError> {
        let png = encode_png(&annotate_candidates(full, text_candidate, icon_candidate))?;
        let body = self.post(&png, &WireCall::Select { instruction, text_candidate, icon_candidate })?;
        let (candidate, raw_text) = match self.cfg.kind {
            BackendKind::NativeHttp => {
                let resp = wire::parse_select_response(&body)?;
                let c = match resp.choice {
                    WireChoice::Text => Candidate::TextCandidate,
                    WireChoice::Icon => Candidate::IconCandidate,
                };
                (c, resp.raw)
            }
            _ => {
                let text = wire::parse_chat_response(&body)?;
                (parse_choice(&text)?, text)
            }
        };
        Ok(Choice { candidate, raw_text, source: ChoiceSource::Model })
    }
}
