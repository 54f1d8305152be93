use std::sync::{Condvar, Mutex, OnceLock};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    check_embeddings, restrict_and_renormalize, Capabilities, FillRequest, FillResponse,
    LanguageModel, TokenProb, CLIENT_SIDE_TOP_K,
};
use crate::error::{Error, GatewayError, Result};

#[derive(Serialize)]
struct FillBody<'a> {
    text: &'a str,
    allowed_tokens: Option<&'a Vec<Vec<String>>>,
    top_k: usize,
}

#[derive(Deserialize)]
struct FillReply {
    slots: Vec<Vec<TokenProb>>,
}

#[derive(Serialize)]
struct EmbedBody<'a> {
    texts: &'a [String],
    pooling: &'static str,
}

#[derive(Deserialize)]
struct EmbedReply {
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

/// Counting semaphore capping concurrent requests.
struct InFlight {
    used: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        while *used >= self.cap {
            used = self.freed.wait(used).unwrap_or_else(|e| e.into_inner());
        }
        *used += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut used = self.0.used.lock().unwrap_or_else(|e| e.into_inner());
        *used -= 1;
        self.0.freed.notify_one();
    }
}

/// JSON-over-HTTP client for an external model server.
///
/// Transport failures and 5xx answers are retried with exponential backoff;
/// every endpoint is a pure function of its request, so retries are safe.
pub struct HttpGateway {
    base_url: String,
    client: reqwest::blocking::Client,
    max_retries: u32,
    batch_size: usize,
    dim: usize,
    in_flight: InFlight,
    capabilities: OnceLock<Capabilities>,
}

impl HttpGateway {
    pub fn new(
        base_url: &str,
        timeout: Duration,
        max_retries: u32,
        batch_size: usize,
        max_in_flight: usize,
        dim: usize,
    ) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::validation(format!("cannot build HTTP client: {e}")))?;
        Ok(HttpGateway {
            base_url: base_url.trim_end_matches('/').to_string(),
            client,
            max_retries,
            batch_size: batch_size.max(1),
            dim,
            in_flight: InFlight {
                used: Mutex::new(0),
                freed: Condvar::new(),
                cap: max_in_flight.max(1),
            },
            capabilities: OnceLock::new(),
        })
    }

    fn call<B: Serialize, R: DeserializeOwned>(
        &self,
        path: &str,
        body: Option<&B>,
    ) -> Result<R, GatewayError> {
        let url = format!("{}{}", self.base_url, path);
        let mut attempt = 0;
        loop {
            let result = {
                let _slot = self.in_flight.acquire();
                self.call_once(&url, body)
            };
            match result {
                Err(e) if e.is_retriable() && attempt < self.max_retries => {
                    log::warn!("{url}: {e}; retrying");
                    std::thread::sleep(Duration::from_millis(50 << attempt.min(6)));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn call_once<B: Serialize, R: DeserializeOwned>(
        &self,
        url: &str,
        body: Option<&B>,
    ) -> Result<R, GatewayError> {
        let request = match body {
            Some(b) => self.client.post(url).json(b),
            None => self.client.get(url),
        };
        let response = request
            .send()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() {
            return Err(GatewayError::Transport(format!("{url}: HTTP {status}")));
        }
        if !status.is_success() {
            return Err(GatewayError::Protocol(format!("{url}: HTTP {status}")));
        }
        let bytes = response
            .bytes()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| GatewayError::Protocol(format!("{url}: malformed response: {e}")))
    }

    fn caps(&self) -> Result<&Capabilities, GatewayError> {
        if let Some(c) = self.capabilities.get() {
            return Ok(c);
        }
        let caps: Capabilities = self.call::<(), _>("/capabilities", None)?;
        if caps.dim != self.dim {
            return Err(GatewayError::Protocol(format!(
                "server embedding dim {} differs from configured {}",
                caps.dim, self.dim
            )));
        }
        Ok(self.capabilities.get_or_init(|| caps))
    }
}

impl LanguageModel for HttpGateway {
    fn fill(&self, request: &FillRequest) -> Result<FillResponse, GatewayError> {
        request.validate()?;
        let server_side = self.caps()?.server_side_restriction;
        let response = match (&request.allowed_tokens, server_side) {
            (Some(allowed), false) => {
                let body = FillBody {
                    text: &request.text,
                    allowed_tokens: None,
                    top_k: request.top_k.max(CLIENT_SIDE_TOP_K),
                };
                let reply: FillReply = self.call("/fill", Some(&body))?;
                let unrestricted = FillResponse { slots: reply.slots };
                unrestricted.validate(&FillRequest {
                    text: request.text.clone(),
                    allowed_tokens: None,
                    top_k: body.top_k,
                })?;
                FillResponse {
                    slots: unrestricted
                        .slots
                        .into_iter()
                        .zip(allowed)
                        .map(|(slot, allowed)| restrict_and_renormalize(slot, allowed, request.top_k))
                        .collect(),
                }
            }
            _ => {
                let body = FillBody {
                    text: &request.text,
                    allowed_tokens: request.allowed_tokens.as_ref(),
                    top_k: request.top_k,
                };
                let reply: FillReply = self.call("/fill", Some(&body))?;
                FillResponse { slots: reply.slots }
            }
        };
        response.validate(request)?;
        Ok(response)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            let reply: EmbedReply = self.call(
                "/embed",
                Some(&EmbedBody {
                    texts: chunk,
                    pooling: "mean",
                }),
            )?;
            if reply.dim != self.dim {
                return Err(GatewayError::Protocol(format!(
                    "embedding dim {} differs from configured {}",
                    reply.dim, self.dim
                )));
            }
            check_embeddings(&reply.vectors, chunk.len(), self.dim)?;
            out.extend(reply.vectors);
        }
        Ok(out)
    }

    fn capabilities(&self) -> Result<Capabilities, GatewayError> {
        self.caps().cloned()
    }

    fn embedding_dim(&self) -> usize {
        self.dim
    }
}
