//! Client for the `/v1/embed` HTTP protocol served by the model sidecar.

use std::io::Cursor;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use base64::Engine;
use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

use crate::encoders::embedding::{Embedding, Modality};
use crate::encoders::{ImageEncoder, TextEncoder};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub model_id: String,
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub endpoint: String,
    /// Expected dimension; learned from the first response when absent.
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_batch")]
    pub max_batch: usize,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_timeout_ms() -> u64 {
    30_000
}
fn default_max_batch() -> usize {
    32
}
fn default_max_in_flight() -> usize {
    4
}
fn default_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    100
}

impl RemoteConfig {
    pub fn new(model_id: impl Into<String>, endpoint: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            endpoint: endpoint.into(),
            dim: None,
            timeout_ms: default_timeout_ms(),
            max_batch: default_max_batch(),
            max_in_flight: default_max_in_flight(),
            retries: default_retries(),
            backoff_ms: default_backoff_ms(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WireModality {
    Image,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub model: String,
    pub modality: WireModality,
    pub inputs: Vec<EmbedInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedInput {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b64_png: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub model: String,
    pub dim: usize,
    pub embeddings: Vec<EmbeddedItem>,
}

/// One response entry: a vector, or an item-level error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedItem {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct ErrorBody {
    #[serde(default)]
    error: Option<String>,
    #[serde(default)]
    errors: Vec<EmbeddedItem>,
}

/// An input for [`RemoteEncoder::embed_remote`].
#[derive(Debug, Clone, Copy)]
pub enum RemoteItem<'a> {
    Image(&'a RgbImage),
    Text(&'a str),
}

struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Self {
            permits: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut p = self.permits.lock().unwrap_or_else(|e| e.into_inner());
        while *p == 0 {
            p = self.cv.wait(p).unwrap_or_else(|e| e.into_inner());
        }
        *p -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct RemoteEncoder {
    config: RemoteConfig,
    agent: ureq::Agent,
    session_dim: Mutex<Option<usize>>,
    in_flight: Semaphore,
}

impl std::fmt::Debug for RemoteEncoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteEncoder")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

enum Attempt {
    Retry(String),
    Fatal(Error),
}

impl RemoteEncoder {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        if config.max_batch == 0 {
            return Err(Error::config("remote encoder max_batch must be >= 1"));
        }
        if config.dim == Some(0) {
            return Err(Error::config("remote encoder dim must be >= 1"));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            in_flight: Semaphore::new(config.max_in_flight),
            session_dim: Mutex::new(config.dim),
            agent,
            config,
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    /// Dimension observed so far in this session, if any.
    pub fn session_dim(&self) -> Option<usize> {
        *self.session_dim.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Embeds a mixed batch, returning unit-norm embeddings in input order.
    pub fn embed_remote(&self, items: &[(String, RemoteItem<'_>)]) -> Result<Vec<Embedding>> {
        let mut images = Vec::new();
        let mut texts = Vec::new();
        for (pos, (id, item)) in items.iter().enumerate() {
            match item {
                RemoteItem::Image(img) => images.push((
                    pos,
                    EmbedInput {
                        id: id.clone(),
                        b64_png: Some(encode_png(img)?),
                        text: None,
                    },
                )),
                RemoteItem::Text(t) => texts.push((
                    pos,
                    EmbedInput {
                        id: id.clone(),
                        b64_png: None,
                        text: Some((*t).to_string()),
                    },
                )),
            }
        }
        let mut out: Vec<Option<Embedding>> = vec![None; items.len()];
        for (modality, group) in [(WireModality::Image, images), (WireModality::Text, texts)] {
            if group.is_empty() {
                continue;
            }
            let (positions, inputs): (Vec<usize>, Vec<EmbedInput>) = group.into_iter().unzip();
            let vectors = self.embed_inputs(modality, inputs)?;
            let tag = match modality {
                WireModality::Image => Modality::Image,
                WireModality::Text => Modality::Text,
            };
            for (pos, v) in positions.into_iter().zip(vectors) {
                out[pos] = Some(Embedding::new(v, tag, self.config.model_id.clone()).renormalize()?);
            }
        }
        Ok(out.into_iter().map(|e| e.expect("every slot filled")).collect())
    }

    fn embed_inputs(&self, modality: WireModality, inputs: Vec<EmbedInput>) -> Result<Vec<Vec<f32>>> {
        let chunks: Vec<Vec<EmbedInput>> = inputs
            .chunks(self.config.max_batch)
            .map(<[EmbedInput]>::to_vec)
            .collect();
        if chunks.len() == 1 {
            return self.send_chunk(modality, chunks.into_iter().next().unwrap());
        }
        let results: Vec<Result<Vec<Vec<f32>>>> = thread::scope(|s| {
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|chunk| s.spawn(move || self.send_chunk(modality, chunk)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::Protocol("worker panicked".into()))))
                .collect()
        });
        let mut out = Vec::new();
        for r in results {
            out.extend(r?);
        }
        Ok(out)
    }

    fn send_chunk(&self, modality: WireModality, inputs: Vec<EmbedInput>) -> Result<Vec<Vec<f32>>> {
        let ids: Vec<String> = inputs.iter().map(|i| i.id.clone()).collect();
        let request = EmbedRequest {
            model: self.config.model_id.clone(),
            modality,
            inputs,
        };
        let response = {
            let _permit = self.in_flight.acquire();
            self.post_with_retries(&request)?
        };
        self.check_response(&ids, response)
    }

    fn post_with_retries(&self, request: &EmbedRequest) -> Result<EmbedResponse> {
        let url = format!("{}/v1/embed", self.config.endpoint.trim_end_matches('/'));
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let wait = self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                thread::sleep(Duration::from_millis(wait));
            }
            match self.post_once(&url, request) {
                Ok(resp) => return Ok(resp),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    log::debug!("embed request attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                }
            }
        }
        Err(Error::Unavailable {
            attempts,
            message: last,
        })
    }

    fn post_once(&self, url: &str, request: &EmbedRequest) -> std::result::Result<EmbedResponse, Attempt> {
        let mut resp = self
            .agent
            .post(url)
            .send_json(request)
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(format!("reading response body: {e}")))?;
        match status {
            200..=299 => serde_json::from_str(&body)
                .map_err(|e| Attempt::Fatal(Error::Protocol(format!("bad response body: {e}")))),
            400..=499 => Err(Attempt::Fatal(Error::Caller {
                status,
                message: describe_error_body(&body),
            })),
            _ => Err(Attempt::Retry(format!("HTTP {status}: {}", describe_error_body(&body)))),
        }
    }

    fn check_response(&self, ids: &[String], resp: EmbedResponse) -> Result<Vec<Vec<f32>>> {
        if resp.dim == 0 {
            return Err(Error::Protocol("server reported dim 0".into()));
        }
        {
            let mut session = self.session_dim.lock().unwrap_or_else(|e| e.into_inner());
            match *session {
                Some(d) if d != resp.dim => {
                    return Err(Error::Protocol(format!(
                        "dimension changed within session: expected {d}, got {}",
                        resp.dim
                    )))
                }
                Some(_) => {}
                None => *session = Some(resp.dim),
            }
        }
        if resp.embeddings.len() != ids.len() {
            return Err(Error::Protocol(format!(
                "sent {} inputs, received {} embeddings",
                ids.len(),
                resp.embeddings.len()
            )));
        }
        let mut out = Vec::with_capacity(ids.len());
        for (expected, item) in ids.iter().zip(resp.embeddings) {
            if &item.id != expected {
                return Err(Error::Protocol(format!(
                    "response order mismatch: expected id {expected}, got {}",
                    item.id
                )));
            }
            if let Some(err) = item.error {
                return Err(Error::Caller {
                    status: 400,
                    message: format!("item {}: {err}", item.id),
                });
            }
            let v = item
                .vector
                .ok_or_else(|| Error::Protocol(format!("item {} has no vector", item.id)))?;
            if v.len() != resp.dim {
                return Err(Error::Protocol(format!(
                    "item {} has {} values, response dim is {}",
                    item.id,
                    v.len(),
                    resp.dim
                )));
            }
            out.push(v);
        }
        Ok(out)
    }
}

fn describe_error_body(body: &str) -> String {
    match serde_json::from_str::<ErrorBody>(body) {
        Ok(parsed) if parsed.error.is_some() || !parsed.errors.is_empty() => {
            let mut parts: Vec<String> = parsed.error.into_iter().collect();
            parts.extend(parsed.errors.into_iter().map(|e| {
                format!("{}: {}", e.id, e.error.unwrap_or_default())
            }));
            parts.join("; ")
        }
        _ => body.chars().take(500).collect(),
    }
}

pub fn encode_png(image: &RgbImage) -> Result<String> {
    let mut buf = Cursor::new(Vec::new());
    image
        .write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| Error::invalid(format!("png encoding failed: {e}")))?;
    Ok(base64::engine::general_purpose::STANDARD.encode(buf.into_inner()))
}

impl ImageEncoder for RemoteEncoder {
    fn model_id(&self) -> &str {
        &self.config.model_id
    }

    fn dim(&self) -> usize {
        self.session_dim().unwrap_or(0)
    }

    fn embed_images(&self, images: &[&RgbImage]) -> Result<Vec<Embedding>> {
        let items: Vec<(String, RemoteItem<'_>)> = images
            .iter()
            .enumerate()
            .map(|(i, img)| (i.to_string(), RemoteItem::Image(img)))
            .collect();
        self.embed_remote(&items)
    }
}

impl TextEncoder for RemoteEncoder {
    fn model_id(&self) -> &str {
        &self.config.model_id
    }

    fn dim(&self) -> usize {
        self.session_dim().unwrap_or(0)
    }

    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        let items: Vec<(String, RemoteItem<'_>)> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| (i.to_string(), RemoteItem::Text(t)))
            .collect();
        self.embed_remote(&items)
    }
}

#[cfg(test)]
pub(crate) mod stub {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Minimal HTTP/1.1 server answering each request via `handler(n, body)`,
    /// where `n` counts requests from 0. Runs until the process exits.
    pub fn serve<F>(handler: F) -> (String, Arc<AtomicUsize>)
    where
        F: Fn(usize, &str) -> (u16, String) + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let count = Arc::new(AtomicUsize::new(0));
        let counter = count.clone();
        let handler = Arc::new(handler);
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let handler = handler.clone();
                let n = counter.fetch_add(1, Ordering::SeqCst);
                std::thread::spawn(move || {
                    let mut reader = BufReader::new(stream.try_clone().unwrap());
                    let mut len = 0usize;
                    loop {
                        let mut line = String::new();
                        if reader.read_line(&mut line).unwrap_or(0) == 0 {
                            return;
                        }
                        let line = line.trim_end();
                        if line.is_empty() {
                            break;
                        }
                        if let Some((k, v)) = line.split_once(':') {
                            if k.eq_ignore_ascii_case("content-length") {
                                len = v.trim().parse().unwrap_or(0);
                            }
                        }
                    }
                    let mut body = vec![0; len];
                    if reader.read_exact(&mut body).is_err() {
                        return;
                    }
                    let (status, reply) = handler(n, &String::from_utf8_lossy(&body));
                    let _ = write!(
                        stream,
                        "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                        reply.len()
                    );
                });
            }
        });
        (format!("http://{addr}"), count)
    }
}
