//! Literature-mined cloze prompting for drug-synergy data augmentation.
//!
//! The pipeline mines synergy sentences from an abstract corpus, turns cluster
//! medoids of the masked sentences into prompt templates, fills them through a
//! masked language model gateway to synthesize weighted positive triplets, and
//! trains a drug/cell embedding classifier on the augmented data.

pub mod augment;
pub mod classifier;
pub mod config;
pub mod corpus;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gateway;
pub mod manifest;
pub mod seed;
pub mod synth;
pub mod template;
pub mod vocab;

pub use error::{Error, GatewayError, Result};
