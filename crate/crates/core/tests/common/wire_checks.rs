//! Wire-protocol scenarios against the in-process stub.

use std::io::Cursor;

use base64::Engine as _;
use dimo::backend::{
    parse_point, BackendConfig, BackendError, BackendKind, Candidate, ChoiceSource, HttpBackend, NEGATIVE_CORPUS,
    POSITIVE_CORPUS,
};
use dimo::engine::{ground, EngineConfig, EngineMode, StopReason};
use dimo::geometry::{Point, Size};
use image::RgbImage;
use serde_json::Value;

use super::stub::{ok, status, Stub};
use super::{check_golden, wire_requests};

type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn backend(kind: BackendKind, stub: &Stub, retries: u32) -> HttpBackend {
    let cfg = BackendConfig {
        kind,
        endpoint: stub.url.clone(),
        model: "grounding-model".into(),
        retries,
        retry_backoff_ms: 1,
        timeout_ms: 5_000,
        api_token: Some("secret-token".into()),
        ..BackendConfig::default()
    };
    HttpBackend::new(cfg).expect("valid config")
}

fn screenshot() -> RgbImage {
    RgbImage::from_fn(1000, 600, |x, y| image::Rgb([(x % 256) as u8, (y % 256) as u8, 90]))
}

fn decoded_size(body: &[u8], field: &str) -> Result<(u32, u32), String> {
    let v: Value = serde_json::from_slice(body).map_err(|e| e.to_string())?;
    let b64 = v[field].as_str().ok_or("request has no image field")?;
    let png = base64::engine::general_purpose::STANDARD.decode(b64).map_err(|e| e.to_string())?;
    let img = image::ImageReader::new(Cursor::new(png)).with_guessed_format().map_err(|e| e.to_string())?;
    img.into_dimensions().map_err(|e| e.to_string())
}

/// Request bodies for both kinds match the committed fixtures.
pub fn byte_stable_requests() -> Check {
    for (name, url, body) in wire_requests() {
        check_golden(&name, &body)?;
        let again = wire_requests().into_iter().find(|(n, ..)| *n == name).unwrap();
        ensure(again.1 == url && again.2 == body, format!("{name} is not stable across builds"))?;
    }
    let urls: Vec<String> = wire_requests().into_iter().map(|(_, u, _)| u).collect();
    ensure(
        urls == [
            "http://127.0.0.1:8000/v1/predict",
            "http://127.0.0.1:8000/v1/select",
            "http://127.0.0.1:8000/chat/completions",
            "http://127.0.0.1:8000/chat/completions",
        ],
        format!("unexpected urls {urls:?}"),
    )
}

/// Full pipeline over the native protocol: crops are sent as PNGs of the
/// zoomed size, and the per-response convention is honored.
pub fn native_success() -> Check {
    let predict = r#"{"x": 0.5, "y": 0.5, "convention": "norm01", "raw": "(0.5, 0.5)"}"#;
    let pixels = r#"{"x": 250, "y": 150, "convention": "pixels", "raw": "(250, 150)"}"#;
    let stub = Stub::start(vec![ok(predict), ok(pixels)]);
    let b = backend(BackendKind::NativeHttp, &stub, 0);
    let cfg = EngineConfig { mode: EngineMode::DynamicOnly, ..EngineConfig::default() };
    let r = ground(&screenshot(), "open settings", &cfg, &b).map_err(|e| e.to_string())?;
    ensure(r.final_point == Point::new(500.0, 300.0), format!("final point {:?}", r.final_point))?;
    ensure(r.traces[0].stop_reason() == StopReason::Converged, "expected convergence")?;
    let reqs = stub.requests();
    ensure(reqs.len() == 2, format!("{} requests", reqs.len()))?;
    ensure(reqs.iter().all(|r| r.method == "POST" && r.path == "/v1/predict"), "wrong method or path")?;
    ensure(reqs[0].authorization.as_deref() == Some("Bearer secret-token"), "missing bearer token")?;
    let v: Value = serde_json::from_slice(&reqs[0].body).map_err(|e| e.to_string())?;
    ensure(v["modality"] == "generic" && v["instruction"] == "open settings", format!("body {v}"))?;
    ensure(decoded_size(&reqs[0].body, "image")? == (1000, 600), "first crop is not the full image")?;
    ensure(decoded_size(&reqs[1].body, "image")? == (500, 300), "second crop is not half size")?;

    let stub = Stub::start(vec![ok(r#"{"choice": "icon", "raw": "B"}"#)]);
    let b = backend(BackendKind::NativeHttp, &stub, 0);
    let c = dimo::backend::select_candidate(&b, &screenshot(), "open settings", Point::new(10.0, 10.0), Point::new(900.0, 500.0))
        .map_err(|e| e.to_string())?;
    ensure(c.candidate == Candidate::IconCandidate && c.source == ChoiceSource::Model, format!("{c:?}"))?;
    let v: Value = serde_json::from_slice(&stub.requests()[0].body).map_err(|e| e.to_string())?;
    ensure(v["candidates"][1]["id"] == "icon" && v["candidates"][1]["x"] == 900.0, format!("select body {v}"))
}

/// Two 500s then success with two retries allowed.
pub fn retry_then_success() -> Check {
    let good = r#"{"x": 10, "y": 20, "convention": "pixels", "raw": "(10, 20)"}"#;
    let stub = Stub::start(vec![status(500), status(503), ok(good)]);
    let b = backend(BackendKind::NativeHttp, &stub, 2);
    let img = screenshot();
    let crop = dimo::backend::ImageCrop::full(&img);
    let p = dimo::backend::predict_coordinate(&b, &crop, "x", dimo::ModalityTag::Icon).map_err(|e| e.to_string())?;
    ensure(p.point == Point::new(10.0, 20.0), format!("{:?}", p.point))?;
    ensure(stub.requests().len() == 3, format!("{} attempts", stub.requests().len()))?;
    let stub = Stub::start(vec![status(429), ok(good)]);
    let b = backend(BackendKind::NativeHttp, &stub, 1);
    dimo::backend::predict_coordinate(&b, &crop, "x", dimo::ModalityTag::Icon).map_err(|e| e.to_string())?;
    ensure(stub.requests().len() == 2, "429 was not retried")
}

/// Exhausted retries, non-retryable statuses, refused connections and
/// malformed bodies all surface as errors; an unparseable chat answer is a
/// parse failure the engine falls back on.
pub fn failure_paths() -> Check {
    let img = screenshot();
    let crop = dimo::backend::ImageCrop::full(&img);
    let call = |b: &HttpBackend| dimo::backend::predict_coordinate(b, &crop, "x", dimo::ModalityTag::Text);

    let stub = Stub::start(vec![status(500), status(500), status(500), status(500)]);
    let e = call(&backend(BackendKind::NativeHttp, &stub, 2));
    ensure(matches!(e, Err(BackendError::Unavailable(_))), format!("exhausted retries gave {e:?}"))?;
    ensure(stub.requests().len() == 3, format!("{} attempts for retries=2", stub.requests().len()))?;

    let stub = Stub::start(vec![status(400)]);
    let e = call(&backend(BackendKind::NativeHttp, &stub, 3));
    ensure(matches!(e, Err(BackendError::Unavailable(_))), format!("400 gave {e:?}"))?;
    ensure(stub.requests().len() == 1, "400 must not be retried")?;

    let stub = Stub::start(vec![ok("{\"x\": 1}")]);
    let e = call(&backend(BackendKind::NativeHttp, &stub, 0));
    ensure(matches!(e, Err(BackendError::Protocol(_))), format!("malformed body gave {e:?}"))?;

    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let cfg = BackendConfig {
        kind: BackendKind::NativeHttp,
        endpoint: format!("http://127.0.0.1:{port}"),
        retries: 1,
        retry_backoff_ms: 1,
        ..BackendConfig::default()
    };
    let e = call(&HttpBackend::new(cfg).unwrap());
    ensure(matches!(e, Err(BackendError::Unavailable(_))), format!("refused connection gave {e:?}"))?;

    let chat = r#"{"choices":[{"message":{"role":"assistant","content":"I am not sure."}}]}"#;
    let stub = Stub::start(vec![ok(chat)]);
    let e = call(&backend(BackendKind::OpenAiCompat, &stub, 0));
    ensure(matches!(e, Err(BackendError::ParseFailure { .. })), format!("prose answer gave {e:?}"))?;

    let stub = Stub::start(vec![ok(chat), ok(chat)]);
    let cfg = EngineConfig { mode: EngineMode::DynamicOnly, max_iters: 3, ..EngineConfig::default() };
    let r = ground(&img, "x", &cfg, &backend(BackendKind::OpenAiCompat, &stub, 0)).map_err(|e| e.to_string())?;
    ensure(r.traces[0].stop_reason() == StopReason::ParseFallback, "parse failures must fall back, not abort")?;
    ensure(r.final_point == Point::new(500.0, 300.0), format!("fallback point {:?}", r.final_point))
}

/// OpenAI-compatible round trip including the selection prompt.
pub fn openai_round_trip() -> Check {
    let chat = |s: &str| ok(&format!(r#"{{"choices":[{{"message":{{"role":"assistant","content":"{s}"}}}}]}}"#));
    let stub = Stub::start(vec![chat("(0.25, 0.75)"), chat("Answer: B")]);
    let mut b_cfg = BackendConfig {
        kind: BackendKind::OpenAiCompat,
        endpoint: format!("{}/v1", stub.url),
        model: "m".into(),
        convention: dimo::CoordConvention::Normalized01,
        retry_backoff_ms: 1,
        ..BackendConfig::default()
    };
    b_cfg.api_token = Some("tok".into());
    let b = HttpBackend::new(b_cfg).unwrap();
    let img = screenshot();
    let crop = dimo::backend::ImageCrop::full(&img);
    let p = dimo::backend::predict_coordinate(&b, &crop, "save", dimo::ModalityTag::Text).map_err(|e| e.to_string())?;
    ensure(p.point == Point::new(250.0, 450.0), format!("{:?}", p.point))?;
    let c = dimo::backend::select_candidate(&b, &img, "save", Point::new(1.0, 1.0), Point::new(999.0, 599.0))
        .map_err(|e| e.to_string())?;
    ensure(c.candidate == Candidate::IconCandidate, format!("{c:?}"))?;
    let reqs = stub.requests();
    ensure(reqs.iter().all(|r| r.path == "/v1/chat/completions"), "wrong chat path")?;
    ensure(reqs[0].authorization.as_deref() == Some("Bearer tok"), "missing bearer token")?;
    let v: Value = serde_json::from_slice(&reqs[1].body).map_err(|e| e.to_string())?;
    let prompt = v["messages"][0]["content"][0]["text"].as_str().unwrap_or_default();
    ensure(prompt.contains("(1.0, 1.0)") && prompt.contains("(999.0, 599.0)"), format!("select prompt {prompt}"))?;
    let url = v["messages"][0]["content"][1]["image_url"]["url"].as_str().unwrap_or_default();
    ensure(url.starts_with("data:image/png;base64,"), "image is not a PNG data URL")
}

pub fn health() -> Check {
    let stub = Stub::start(vec![ok(r#"{"status": "ok", "model": "echo"}"#)]);
    let h = backend(BackendKind::NativeHttp, &stub, 0).health().map_err(|e| e.to_string())?;
    ensure(h.status == "ok" && h.model == "echo", format!("{h:?}"))?;
    let r = &stub.requests()[0];
    ensure(r.method == "GET" && r.path == "/v1/health", format!("{} {}", r.method, r.path))
}

/// At least 10 positive and 5 negative output formats.
pub fn parsing_corpus() -> Check {
    ensure(POSITIVE_CORPUS.len() >= 10 && NEGATIVE_CORPUS.len() >= 5, "corpus too small")?;
    let frame = Size { width: 1000, height: 600 };
    for (raw, conv, (x, y)) in POSITIVE_CORPUS {
        let p = parse_point(raw, *conv, frame).map_err(|e| format!("{raw:?}: {e}"))?;
        ensure((p.x - x).abs() < 1e-9 && (p.y - y).abs() < 1e-9, format!("{raw:?} parsed to {p:?}"))?;
    }
    for raw in NEGATIVE_CORPUS {
        let r = parse_point(raw, dimo::CoordConvention::Pixels, frame);
        ensure(matches!(r, Err(BackendError::ParseFailure { .. })), format!("{raw:?} parsed to {r:?}"))?;
    }
    Ok(())
}

pub fn all() -> Vec<(&'static str, Check)> {
    vec![
        ("byte-stable request bodies", byte_stable_requests()),
        ("native success", native_success()),
        ("retry then success", retry_then_success()),
        ("failure paths", failure_paths()),
        ("openai-compatible round trip", openai_round_trip()),
        ("health endpoint", health()),
        ("parsing corpus", parsing_corpus()),
    ]
}
