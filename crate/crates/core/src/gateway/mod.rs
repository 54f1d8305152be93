//! Client side of the masked-language-model boundary.
//!
//! Two operations cross it: cloze filling of `[MASK]` positions and
//! mean-pooled sentence embedding. [`MockGateway`] answers both as a pure
//! function of its seed and the request; [`HttpGateway`] speaks the JSON
//! protocol to an external model server.

mod http;
mod mock;

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, GatewayError, Result};

pub use http::HttpGateway;
pub use mock::MockGateway;

/// Mask marker understood by the model server.
pub const MASK_TOKEN: &str = "[MASK]";

/// How many candidates to request when the server cannot restrict tokens
/// itself and the client has to filter.
pub const CLIENT_SIDE_TOP_K: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillRequest {
    pub text: String,
    /// One allowed-token list per mask, in text order.
    pub allowed_tokens: Option<Vec<Vec<String>>>,
    pub top_k: usize,
}

impl FillRequest {
    pub fn new(text: impl Into<String>) -> Self {
        FillRequest {
            text: text.into(),
            allowed_tokens: None,
            top_k: 1,
        }
    }

    pub fn mask_count(&self) -> usize {
        self.text.matches(MASK_TOKEN).count()
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let masks = self.mask_count();
        if masks == 0 {
            return Err(GatewayError::Protocol("fill request has no [MASK] marker".into()));
        }
        if self.top_k == 0 {
            return Err(GatewayError::Protocol("top_k must be at least 1".into()));
        }
        if let Some(allowed) = &self.allowed_tokens {
            if allowed.len() != masks {
                return Err(GatewayError::Protocol(format!(
                    "{} allowed-token lists for {masks} masks",
                    allowed.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenProb {
    pub token: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillResponse {
    /// Ranked candidates per mask, most likely first.
    pub slots: Vec<Vec<TokenProb>>,
}

impl FillResponse {
    /// Checks the response against the request it answers.
    pub fn validate(&self, request: &FillRequest) -> Result<(), GatewayError> {
        if self.slots.len() != request.mask_count() {
            return Err(GatewayError::Protocol(format!(
                "response has {} slots for {} masks",
                self.slots.len(),
                request.mask_count()
            )));
        }
        for (i, slot) in self.slots.iter().enumerate() {
            if slot.len() > request.top_k {
                return Err(GatewayError::Protocol(format!(
                    "slot {i}: {} candidates exceeds top_k {}",
                    slot.len(),
                    request.top_k
                )));
            }
            let mut sum = 0.0;
            for (j, tp) in slot.iter().enumerate() {
                if !tp.prob.is_finite() || tp.prob <= 0.0 || tp.prob > 1.0 {
                    return Err(GatewayError::Protocol(format!(
                        "slot {i}: probability {} of {:?} outside (0, 1]",
                        tp.prob, tp.token
                    )));
                }
                if j > 0 && tp.prob > slot[j - 1].prob {
                    return Err(GatewayError::Protocol(format!(
                        "slot {i}: probabilities not in descending order"
                    )));
                }
                sum += tp.prob;
            }
            if sum > 1.0 + 1e-6 {
                return Err(GatewayError::Protocol(format!(
                    "slot {i}: probabilities sum to {sum}"
                )));
            }
            if let Some(allowed) = request.allowed_tokens.as_ref().map(|a| &a[i]) {
                let allowed: HashSet<&str> = allowed.iter().map(String::as_str).collect();
                if let Some(bad) = slot.iter().find(|tp| !allowed.contains(tp.token.as_str())) {
                    return Err(GatewayError::Protocol(format!(
                        "slot {i}: token {:?} not in allowed set",
                        bad.token
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capabilities {
    pub vocab_size: usize,
    pub dim: usize,
    pub server_side_restriction: bool,
    pub model_id: String,
}

/// A masked language model reachable for filling and embedding.
pub trait LanguageModel: Send + Sync {
    fn fill(&self, request: &FillRequest) -> Result<FillResponse, GatewayError>;

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError>;

    fn capabilities(&self) -> Result<Capabilities, GatewayError>;

    fn embedding_dim(&self) -> usize;
}

pub(crate) fn check_embeddings(
    vectors: &[Vec<f64>],
    expected_count: usize,
    dim: usize,
) -> Result<(), GatewayError> {
    if vectors.len() != expected_count {
        return Err(GatewayError::Protocol(format!(
            "{} vectors returned for {expected_count} texts",
            vectors.len()
        )));
    }
    for v in vectors {
        if v.len() != dim {
            return Err(GatewayError::Protocol(format!(
                "embedding dim {} differs from configured {dim}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(GatewayError::Protocol("non-finite embedding entry".into()));
        }
    }
    Ok(())
}

/// Restricts a ranked distribution to `allowed`, renormalizes and truncates.
pub(crate) fn restrict_and_renormalize(
    slot: Vec<TokenProb>,
    allowed: &[String],
    top_k: usize,
) -> Vec<TokenProb> {
    let allowed: HashSet<&str> = allowed.iter().map(String::as_str).collect();
    let kept: Vec<TokenProb> = slot
        .into_iter()
        .filter(|tp| allowed.contains(tp.token.as_str()))
        .collect();
    let total: f64 = kept.iter().map(|tp| tp.prob).sum();
    kept.into_iter()
        .take(top_k)
        .map(|tp| TokenProb {
            prob: (tp.prob / total).min(1.0),
            token: tp.token,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    Mock {
        seed: u64,
    },
    Http {
        base_url: String,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
        #[serde(default = "default_retries")]
        max_retries: u32,
        #[serde(default = "default_batch")]
        batch_size: usize,
        #[serde(default = "default_in_flight")]
        max_in_flight: usize,
    },
}

fn default_timeout() -> f64 {
    30.0
}
fn default_retries() -> u32 {
    3
}
fn default_batch() -> usize {
    32
}
fn default_in_flight() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub backend: Backend,
    pub embedding_dim: usize,
    /// One token per line: the model's single-token vocabulary.
    pub token_vocab: PathBuf,
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 {
            return Err(Error::validation("gateway embedding_dim must be positive"));
        }
        if let Backend::Http {
            timeout_secs,
            batch_size,
            max_in_flight,
            ..
        } = &self.backend
        {
            if !(*timeout_secs > 0.0) {
                return Err(Error::validation("gateway timeout must be positive"));
            }
            if *batch_size == 0 || *max_in_flight == 0 {
                return Err(Error::validation(
                    "gateway batch_size and max_in_flight must be positive",
                ));
            }
        }
        Ok(())
    }

    /// Builds the configured backend. `tokens` is the single-token vocabulary
    /// the mock draws its fills from.
    pub fn connect(&self, tokens: &[String]) -> Result<Box<dyn LanguageModel>> {
        self.validate()?;
        Ok(match &self.backend {
            Backend::Mock { seed } => Box::new(MockGateway::new(
                *seed,
                tokens.to_vec(),
                self.embedding_dim,
            )),
            Backend::Http {
                base_url,
                timeout_secs,
                max_retries,
                batch_size,
                max_in_flight,
            } => Box::new(HttpGateway::new(
                base_url,
                std::time::Duration::from_secs_f64(*timeout_secs),
                *max_retries,
                *batch_size,
                *max_in_flight,
                self.embedding_dim,
            )?),
        })
    }
}

/// Reads a token vocabulary file (one token per line, blank lines ignored).
pub fn load_token_vocab(path: impl AsRef<std::path::Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut seen = HashSet::new();
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .filter(|t| seen.insert(t.clone()))
        .collect())
}
