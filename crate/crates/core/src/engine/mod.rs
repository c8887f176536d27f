//! Inference pipeline of the entity-ranking model: candidate enumeration, mention
//! proposal with top-K pruning, and incremental entity clustering.
//!
//! The engine is generic over its scoring functions. [`SpanScorer`] supplies span
//! representations with their mention scores; [`EntityScorer`] supplies the pair
//! feature embeddings and the feed-forward scorer applied to the pair input.

pub mod candidates;
pub mod cluster;
pub mod entity;
pub mod features;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Span};

pub use candidates::{enumerate_candidates, propose_mentions, prune_for_inference, select_top_k, top_k_count};
pub use cluster::{cluster_document, cluster_score, pair_input, ClusterOutcome, Decision, TraceStep};
pub use entity::EntityState;
pub use features::PairFeatures;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("representation dimensions differ: span {span} vs entity {entity}")]
    DimensionMismatch { span: usize, entity: usize },
    #[error("teacher forcing needs gold clusters and gold clusters need teacher forcing")]
    GoldRequirement,
    #[error("teacher forcing: span {0} is not a gold mention")]
    SpanNotInGold(Span),
    #[error("spans must be in document order; {0} follows {1}")]
    Unordered(Span, Span),
    #[error("top_k_ratio must lie in (0, 1], got {0}")]
    BadTopKRatio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    pub max_mention_len: usize,
    pub top_k_ratio: f64,
    /// Cluster gold mentions directly instead of proposed ones.
    pub gold_mention_mode: bool,
    /// Follow gold decisions while still computing scores.
    pub teacher_forcing: bool,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            max_mention_len: 20,
            top_k_ratio: 0.4,
            gold_mention_mode: false,
            teacher_forcing: false,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.top_k_ratio > 0.0 && self.top_k_ratio <= 1.0) {
            return Err(EngineError::BadTopKRatio(self.top_k_ratio));
        }
        Ok(())
    }
}

/// A scored candidate mention.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSpan {
    pub span: Span,
    pub representation: Vec<f64>,
    pub mention_score: f64,
}

pub trait SpanScorer {
    /// Representations and mention scores for `spans`, in the same order.
    fn score_spans(&self, doc: &Document, spans: &[Span]) -> Vec<CandidateSpan>;
}

pub trait EntityScorer {
    /// Concatenated feature embeddings `g(x, e)`.
    fn feature_embedding(&self, features: &PairFeatures) -> Vec<f64>;
    /// Feed-forward scorer over `[x; e; x ⊙ e; g]`.
    fn score_pair(&self, input: &[f64]) -> f64;
}

/// Full inference: enumerate, propose top-K, prune at zero (or take gold mentions in
/// gold-mention mode), then cluster. The returned document differs only in clusters.
pub fn predict<S: SpanScorer, E: EntityScorer>(
    doc: &Document,
    span_scorer: &S,
    entity_scorer: &E,
    cfg: &ClusteringConfig,
) -> Result<Document, EngineError> {
    cfg.validate()?;
    let spans = if cfg.gold_mention_mode {
        span_scorer.score_spans(doc, &doc.mentions())
    } else {
        prune_for_inference(propose_mentions(doc, span_scorer, cfg))
    };
    let infer = ClusteringConfig {
        teacher_forcing: false,
        ..*cfg
    };
    let outcome = cluster_document(&spans, entity_scorer, &infer, None)?;
    let mut out = doc.clone();
    out.clusters = outcome.clusters;
    Ok(out)
}
