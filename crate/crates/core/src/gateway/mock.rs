use std::collections::BTreeMap;

use xxhash_rust::xxh3::xxh3_64_with_seed;

use super::{check_embeddings, Capabilities, FillRequest, FillResponse, LanguageModel, TokenProb};
use crate::error::GatewayError;

/// Spread of the mock's logits; larger values give peakier distributions.
const LOGIT_SCALE: f64 = 6.0;

/// Deterministic stand-in for a masked language model.
///
/// Fill distributions are a softmax over hashed logits of
/// `(seed, normalized text, slot index, token)`. Embeddings project the
/// character 3-gram counts of the normalized text through a seeded random
/// matrix, so texts sharing more 3-grams land closer together.
#[derive(Debug, Clone)]
pub struct MockGateway {
    seed: u64,
    tokens: Vec<String>,
    dim: usize,
}

impl MockGateway {
    pub fn new(seed: u64, tokens: Vec<String>, dim: usize) -> Self {
        MockGateway { seed, tokens, dim }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    fn unit(&self, parts: &[&[u8]]) -> f64 {
        let mut buf = Vec::with_capacity(parts.iter().map(|p| p.len() + 1).sum());
        for p in parts {
            buf.extend_from_slice(p);
            buf.push(0x1f);
        }
        let h = xxh3_64_with_seed(&buf, self.seed);
        (h >> 11) as f64 / (1u64 << 53) as f64
    }

    /// The complete ranked distribution for one slot, before `top_k`.
    pub fn distribution(&self, request: &FillRequest, slot: usize) -> Vec<TokenProb> {
        let text = normalize(&request.text);
        let slot_bytes = (slot as u64).to_le_bytes();
        let candidates: Vec<&str> = match &request.allowed_tokens {
            Some(allowed) => {
                let mut c: Vec<&str> = allowed[slot].iter().map(String::as_str).collect();
                c.sort_unstable();
                c.dedup();
                c
            }
            None => self.tokens.iter().map(String::as_str).collect(),
        };
        let logits: Vec<f64> = candidates
            .iter()
            .map(|t| LOGIT_SCALE * self.unit(&[b"fill", text.as_bytes(), &slot_bytes, t.as_bytes()]))
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let mut dist: Vec<TokenProb> = candidates
            .iter()
            .zip(exps)
            .map(|(t, e)| TokenProb {
                token: t.to_string(),
                prob: e / total,
            })
            .collect();
        dist.sort_by(|a, b| b.prob.total_cmp(&a.prob).then_with(|| a.token.cmp(&b.token)));
        dist
    }

    fn embed_one(&self, text: &str) -> Vec<f64> {
        let chars: Vec<char> = normalize(text).chars().collect();
        let mut grams: BTreeMap<String, f64> = BTreeMap::new();
        if chars.len() < 3 {
            if !chars.is_empty() {
                grams.insert(chars.iter().collect(), 1.0);
            }
        } else {
            for w in chars.windows(3) {
                *grams.entry(w.iter().collect()).or_insert(0.0) += 1.0;
            }
        }
        let mut v = vec![0.0; self.dim];
        for (gram, count) in &grams {
            for (j, x) in v.iter_mut().enumerate() {
                let u = self.unit(&[b"embed", gram.as_bytes(), &(j as u64).to_le_bytes()]);
                // uniform on [-sqrt3, sqrt3): zero mean, unit variance
                *x += count * (2.0 * u - 1.0) * 3f64.sqrt();
            }
        }
        v
    }
}

/// Lowercase with runs of whitespace collapsed to one space.
pub(crate) fn normalize(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

impl LanguageModel for MockGateway {
    fn fill(&self, request: &FillRequest) -> Result<FillResponse, GatewayError> {
        request.validate()?;
        let slots = (0..request.mask_count())
            .map(|s| {
                let mut d = self.distribution(request, s);
                d.truncate(request.top_k);
                d
            })
            .collect();
        let response = FillResponse { slots };
        response.validate(request)?;
        Ok(response)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        let vectors: Vec<Vec<f64>> = texts.iter().map(|t| self.embed_one(t)).collect();
        check_embeddings(&vectors, texts.len(), self.dim)?;
        Ok(vectors)
    }

    fn capabilities(&self) -> Result<Capabilities, GatewayError> {
        Ok(Capabilities {
            vocab_size: self.tokens.len(),
            dim: self.dim,
            server_side_restriction: true,
            model_id: format!("mock-seed-{}", self.seed),
        })
    }

    fn embedding_dim(&self) -> usize {
        self.dim
    }
}
