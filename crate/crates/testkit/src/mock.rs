//! Loopback chat-completions endpoint driven by a closure.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde_json::{json, Value as Json};
use tiny_http::{Header, Response, Server};

/// The parts of a chat-completions request a handler looks at.
#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u64>,
    pub authorization: Option<String>,
    /// 1-based count of requests seen by the server, this one included.
    pub sequence: usize,
}

impl ChatRequest {
    /// Text after the last `Question:` label of the user message, up to the
    /// end of that line.
    pub fn question(&self) -> Option<&str> {
        let at = self.user.rfind("Question:")?;
        self.user[at + "Question:".len()..].lines().next().map(str::trim)
    }
}

#[derive(Debug, Clone)]
pub enum MockReply {
    Content(String),
    Status(u16),
    Raw(u16, String),
    Delayed(Duration, Box<MockReply>),
}

type Handler = dyn Fn(&ChatRequest) -> MockReply + Send + Sync;

pub struct MockServer {
    server: Arc<Server>,
    workers: Vec<JoinHandle<()>>,
    requests: Arc<AtomicUsize>,
    port: u16,
}

impl MockServer {
    pub fn start<F>(handler: F) -> Self
    where
        F: Fn(&ChatRequest) -> MockReply + Send + Sync + 'static,
    {
        let server = Arc::new(Server::http("127.0.0.1:0").expect("bind loopback"));
        let port = server.server_addr().to_ip().expect("tcp listener").port();
        let requests = Arc::new(AtomicUsize::new(0));
        let handler: Arc<Handler> = Arc::new(handler);
        let workers = (0..8)
            .map(|_| {
                let (server, handler, requests) = (server.clone(), handler.clone(), requests.clone());
                thread::spawn(move || {
                    while let Ok(mut req) = server.recv() {
                        let sequence = requests.fetch_add(1, Ordering::SeqCst) + 1;
                        let mut body = String::new();
                        let _ = req.as_reader().read_to_string(&mut body);
                        let authorization = req
                            .headers()
                            .iter()
                            .find(|h| h.field.equiv("Authorization"))
                            .map(|h| h.value.to_string());
                        let reply = match parse_request(&body, authorization, sequence) {
                            Some(chat) => handler(&chat),
                            None => MockReply::Raw(400, "bad request".into()),
                        };
                        let _ = respond(req, reply);
                    }
                })
            })
            .collect();
        Self {
            server,
            workers,
            requests,
            port,
        }
    }

    pub fn base_url(&self) -> String {
        format!("http://127.0.0.1:{}/v1", self.port)
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn parse_request(body: &str, authorization: Option<String>, sequence: usize) -> Option<ChatRequest> {
    let v: Json = serde_json::from_str(body).ok()?;
    let messages = v.get("messages")?.as_array()?;
    let content = |role: &str| {
        messages
            .iter()
            .filter(|m| m.get("role").and_then(Json::as_str) == Some(role))
            .filter_map(|m| m.get("content").and_then(Json::as_str))
            .collect::<Vec<_>>()
            .join("\n")
    };
    Some(ChatRequest {
        model: v.get("model").and_then(Json::as_str).unwrap_or_default().to_string(),
        system: content("system"),
        user: content("user"),
        temperature: v.get("temperature").and_then(Json::as_f64),
        max_tokens: v.get("max_tokens").and_then(Json::as_u64),
        authorization,
        sequence,
    })
}

fn respond(req: tiny_http::Request, reply: MockReply) -> std::io::Result<()> {
    let json_header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    match reply {
        MockReply::Content(text) => {
            let body = json!({
                "id": "mock",
                "object": "chat.completion",
                "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
            });
            req.respond(Response::from_string(body.to_string()).with_header(json_header))
        }
        MockReply::Status(code) => req.respond(
            Response::from_string(json!({"error": {"message": "mock failure"}}).to_string())
                .with_status_code(code)
                .with_header(json_header),
        ),
        MockReply::Raw(code, body) => req.respond(Response::from_string(body).with_status_code(code)),
        MockReply::Delayed(d, inner) => {
            thread::sleep(d);
            respond(req, *inner)
        }
    }
}
