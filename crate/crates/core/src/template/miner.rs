use std::collections::HashSet;

use super::{Clustering, PromptTemplate, TemplateSource};
use crate::error::{GatewayError, Result};
use crate::gateway::LanguageModel;

/// Embeds each template's masked text (slots sent as the model's mask token).
pub fn embed_batch(
    gateway: &dyn LanguageModel,
    templates: &[PromptTemplate],
) -> Result<Vec<Vec<f64>>> {
    if templates.is_empty() {
        return Ok(Vec::new());
    }
    let texts: Vec<String> = templates.iter().map(PromptTemplate::masked_text).collect();
    let vectors = gateway.embed(&texts)?;
    let dim = gateway.embedding_dim();
    if vectors.len() != templates.len() || vectors.iter().any(|v| v.len() != dim) {
        return Err(GatewayError::Protocol(format!(
            "expected {} embeddings of dim {dim}",
            templates.len()
        ))
        .into());
    }
    Ok(vectors)
}

/// Keeps the first template for each distinct marked text.
pub fn dedup_by_text(templates: Vec<PromptTemplate>) -> Vec<PromptTemplate> {
    let mut seen = HashSet::new();
    templates
        .into_iter()
        .filter(|t| seen.insert(t.text.clone()))
        .collect()
}

/// The medoid templates in cluster order, retagged with their iteration and
/// cluster id.
pub fn extract_templates(
    clustering: &Clustering,
    templates: &[PromptTemplate],
    iteration: usize,
) -> Vec<PromptTemplate> {
    clustering
        .medoids
        .iter()
        .enumerate()
        .map(|(cluster_id, &m)| {
            let mut t = templates[m].clone();
            let (doc_id, sentence_index) = match &t.source {
                TemplateSource::Sentence {
                    doc_id,
                    sentence_index,
                }
                | TemplateSource::Medoid {
                    doc_id,
                    sentence_index,
                    ..
                } => (doc_id.clone(), *sentence_index),
                TemplateSource::Manual => (String::new(), 0),
            };
            t.source = TemplateSource::Medoid {
                iteration,
                cluster_id,
                doc_id,
                sentence_index,
            };
            t
        })
        .collect()
}
