//! Model endpoint clients: the wire contract extends the judge protocol
//! with generation parameters and a reported token count.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::curate::encode_images;
use crate::{Error, Result};

/// Request handed to a client. `images` are local file refs; HTTP transport
/// base64-encodes them at send time.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRequest {
    pub prompt: String,
    pub images: Vec<String>,
    pub max_output_tokens: u64,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    /// Server-reported count; absent means the harness estimates instead.
    #[serde(default)]
    pub output_tokens: Option<u64>,
}

pub trait ModelClient {
    fn generate(&self, req: &ModelRequest) -> Result<ModelResponse>;
}

#[derive(Serialize)]
struct WireRequest<'a> {
    prompt: &'a str,
    images: Vec<String>,
    max_output_tokens: u64,
    temperature: f64,
}

pub struct HttpModelClient {
    endpoint: String,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
}

impl HttpModelClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            client,
            api_key,
        })
    }
}

impl ModelClient for HttpModelClient {
    fn generate(&self, req: &ModelRequest) -> Result<ModelResponse> {
        let body = WireRequest {
            prompt: &req.prompt,
            images: encode_images(&req.images)?,
            max_output_tokens: req.max_output_tokens,
            temperature: req.temperature,
        };
        let mut http = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            http = http.bearer_auth(key);
        }
        let resp = http.send().map_err(|e| Error::Transport(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(Error::Transport(format!(
                "model endpoint returned {}",
                resp.status()
            )));
        }
        resp.json().map_err(|e| Error::Transport(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockReply {
    pub text: String,
    pub output_tokens: Option<u64>,
    pub fail: bool,
}

impl MockReply {
    pub fn text(text: impl Into<String>, tokens: u64) -> Self {
        Self {
            text: text.into(),
            output_tokens: Some(tokens),
            fail: false,
        }
    }

    pub fn failure() -> Self {
        Self {
            text: String::new(),
            output_tokens: None,
            fail: true,
        }
    }
}

type ReplyFn = Box<dyn Fn(&ModelRequest) -> MockReply + Send + Sync>;

/// In-process stand-in for a model endpoint. Sleeps a programmed delay per
/// call, cycles scripted replies (or derives one from the request), and
/// watches for overlapping calls so tests can prove one-in-flight
/// sequencing.
pub struct MockModelClient {
    delay: Duration,
    replies: Vec<MockReply>,
    reply_fn: Option<ReplyFn>,
    calls: AtomicU64,
    in_flight: AtomicU64,
    max_in_flight: AtomicU64,
}

impl MockModelClient {
    pub fn new(delay: Duration, replies: Vec<MockReply>) -> Self {
        Self {
            delay,
            replies,
            reply_fn: None,
            calls: AtomicU64::new(0),
            in_flight: AtomicU64::new(0),
            max_in_flight: AtomicU64::new(0),
        }
    }

    pub fn with_reply_fn<F>(delay: Duration, f: F) -> Self
    where
        F: Fn(&ModelRequest) -> MockReply + Send + Sync + 'static,
    {
        let mut mock = Self::new(delay, Vec::new());
        mock.reply_fn = Some(Box::new(f));
        mock
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    /// Highest number of concurrently open requests observed.
    pub fn max_in_flight(&self) -> u64 {
        self.max_in_flight.load(Ordering::SeqCst)
    }
}

impl ModelClient for MockModelClient {
    fn generate(&self, req: &ModelRequest) -> Result<ModelResponse> {
        let open = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(open, Ordering::SeqCst);
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        let reply = if let Some(f) = &self.reply_fn {
            f(req)
        } else if self.replies.is_empty() {
            MockReply::failure()
        } else {
            self.replies[n as usize % self.replies.len()].clone()
        };
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        if reply.fail {
            return Err(Error::Transport("mock model scripted failure".into()));
        }
        Ok(ModelResponse {
            text: reply.text,
            output_tokens: reply.output_tokens,
        })
    }
}
