use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::WarmStartPrompt;
use crate::error::{GatewayError, Result};
use crate::gateway::{FillRequest, LanguageModel};
use crate::template::SlotType;
use crate::vocab::{EntityType, EntityVocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskFill {
    pub slot_index: usize,
    pub token: String,
    pub probability: f64,
}

/// Valid entity names the model can produce in a single slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AllowedTokens {
    pub drugs: Vec<String>,
    pub cells: Vec<String>,
    /// Valid names dropped because they are not one gateway token.
    pub multi_token_dropped: usize,
}

impl AllowedTokens {
    /// Non-synthesized vocabulary keys that are also gateway tokens.
    pub fn new(vocab: &EntityVocabulary, gateway_tokens: &BTreeSet<String>) -> Self {
        let mut dropped = 0;
        let mut pick = |t: EntityType| -> Vec<String> {
            let all = vocab.valid_keys_of_type(t);
            let kept: Vec<String> = all.iter().filter(|k| gateway_tokens.contains(*k)).cloned().collect();
            dropped += all.len() - kept.len();
            kept
        };
        let drugs = pick(EntityType::Drug);
        let cells = pick(EntityType::CellLine);
        AllowedTokens {
            drugs,
            cells,
            multi_token_dropped: dropped,
        }
    }

    pub fn for_slot(&self, t: SlotType) -> &[String] {
        match t {
            SlotType::Drug => &self.drugs,
            SlotType::Cell => &self.cells,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FillMode {
    Unrestricted,
    Restricted(AllowedTokens),
}

/// The most likely token for every remaining slot, in one gateway call.
///
/// Returns `Ok(None)` when restricted decoding has nothing to choose from for
/// some slot; the prompt is then discarded.
pub fn fill_prompt(
    gateway: &dyn LanguageModel,
    prompt: &WarmStartPrompt,
    mode: &FillMode,
) -> Result<Option<Vec<MaskFill>>> {
    if prompt.remaining_slots.is_empty() {
        return Ok(Some(Vec::new()));
    }
    let mut request = FillRequest::new(prompt.rendered_text.clone());
    if let FillMode::Restricted(allowed) = mode {
        let lists: Vec<Vec<String>> = prompt
            .remaining_slots
            .iter()
            .map(|s| allowed.for_slot(s.slot_type).to_vec())
            .collect();
        if lists.iter().any(Vec::is_empty) {
            return Ok(None);
        }
        request.allowed_tokens = Some(lists);
    }
    if request.mask_count() != prompt.remaining_slots.len() {
        return Err(GatewayError::Protocol(format!(
            "prompt {:?} renders {} masks for {} open slots",
            prompt.template_id,
            request.mask_count(),
            prompt.remaining_slots.len()
        ))
        .into());
    }
    let response = gateway.fill(&request)?;
    let fills = prompt
        .remaining_slots
        .iter()
        .zip(&response.slots)
        .map(|(slot, ranked)| {
            let best = ranked
                .first()
                .ok_or_else(|| GatewayError::Protocol("empty candidate list for a mask".into()))?;
            Ok(MaskFill {
                slot_index: slot.index,
                token: best.token.clone(),
                probability: best.prob,
            })
        })
        .collect::<Result<Vec<_>, GatewayError>>()?;
    Ok(Some(fills))
}
