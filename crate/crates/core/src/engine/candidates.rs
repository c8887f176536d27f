use std::cmp::Ordering;

use crate::corpus::{Document, Span};
use crate::formats::speaker::marker_mask;

use super::{CandidateSpan, ClusteringConfig, SpanScorer};

/// All spans up to `max_mention_len` tokens that avoid inserted speaker blocks, ordered
/// by (start, end).
pub fn enumerate_candidates(doc: &Document, cfg: &ClusteringConfig) -> Vec<Span> {
    let mask = marker_mask(&doc.tokens);
    let n = doc.tokens.len();
    let mut out = Vec::new();
    for start in 0..n {
        if mask[start] {
            continue;
        }
        for end in start..n.min(start + cfg.max_mention_len) {
            if mask[end] {
                break;
            }
            out.push(Span::new(start, end));
        }
    }
    out
}

/// `K = max(1, floor(ratio · |D|))`.
pub fn top_k_count(doc_len: usize, ratio: f64) -> usize {
    ((ratio * doc_len as f64).floor() as usize).max(1)
}

/// Ranking used for top-K: higher score first, then lower start, then lower end.
pub fn rank_order(a: &CandidateSpan, b: &CandidateSpan) -> Ordering {
    b.mention_score
        .total_cmp(&a.mention_score)
        .then(a.span.cmp(&b.span))
}

/// Indices of the `k` best candidates, returned in document order.
pub fn select_top_k(cands: &[CandidateSpan], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..cands.len()).collect();
    idx.sort_by(|&a, &b| rank_order(&cands[a], &cands[b]));
    idx.truncate(k);
    idx.sort_by(|&a, &b| cands[a].span.cmp(&cands[b].span));
    idx
}

/// Scores every candidate and keeps the top K, in document order.
pub fn propose_mentions<S: SpanScorer>(doc: &Document, scorer: &S, cfg: &ClusteringConfig) -> Vec<CandidateSpan> {
    let spans = enumerate_candidates(doc, cfg);
    let scored = scorer.score_spans(doc, &spans);
    let k = top_k_count(doc.tokens.len(), cfg.top_k_ratio);
    let keep = select_top_k(&scored, k);
    let mut scored: Vec<Option<CandidateSpan>> = scored.into_iter().map(Some).collect();
    keep.into_iter().filter_map(|i| scored[i].take()).collect()
}

/// Inference-time pruning: keeps candidates with non-negative mention score.
pub fn prune_for_inference(cands: Vec<CandidateSpan>) -> Vec<CandidateSpan> {
    cands.into_iter().filter(|c| c.mention_score >= 0.0).collect()
}
