//! In-process HTTP server replaying canned responses.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use tiny_http::{Header, Response, Server};

#[derive(Debug, Clone)]
pub struct Recorded {
    pub method: String,
    pub path: String,
    pub body: Vec<u8>,
    pub authorization: Option<String>,
}

pub struct Stub {
    pub url: String,
    server: Arc<Server>,
    requests: Arc<Mutex<Vec<Recorded>>>,
    handle: Option<JoinHandle<()>>,
}

impl Stub {
    /// Answers requests with `responses` in order, then with 500.
    pub fn start(responses: Vec<(u16, String)>) -> Self {
        let server = Arc::new(Server::http("127.0.0.1:0").expect("bind stub server"));
        let port = server.server_addr().to_ip().expect("tcp listener").port();
        let requests = Arc::new(Mutex::new(Vec::new()));
        let queue = Mutex::new(VecDeque::from(responses));
        let (srv, log) = (server.clone(), requests.clone());
        let handle = std::thread::spawn(move || {
            for mut req in srv.incoming_requests() {
                let mut body = Vec::new();
                req.as_reader().read_to_end(&mut body).ok();
                let authorization = req
                    .headers()
                    .iter()
                    .find(|h| h.field.equiv("Authorization"))
                    .map(|h| h.value.as_str().to_string());
                log.lock().unwrap().push(Recorded {
                    method: req.method().to_string(),
                    path: req.url().to_string(),
                    body,
                    authorization,
                });
                let (code, text) =
                    queue.lock().unwrap().pop_front().unwrap_or((500, r#"{"error":"stub exhausted"}"#.into()));
                let header = Header::from_bytes("Content-Type", "application/json").unwrap();
                req.respond(Response::from_string(text).with_status_code(code).with_header(header)).ok();
            }
        });
        Self { url: format!("http://127.0.0.1:{port}"), server, requests, handle: Some(handle) }
    }

    pub fn requests(&self) -> Vec<Recorded> {
        self.requests.lock().unwrap().clone()
    }
}

impl Drop for Stub {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            h.join().ok();
        }
    }
}

pub fn ok(body: &str) -> (u16, String) {
    (200, body.to_string())
}

pub fn status(code: u16) -> (u16, String) {
    (code, format!(r#"{{"error":"status {code}"}}"#))
}
