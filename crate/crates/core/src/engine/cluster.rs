//! Incremental entity clustering.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Cluster, Span};

use super::{CandidateSpan, ClusteringConfig, EngineError, EntityScorer, EntityState, PairFeatures};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Attach(usize),
    New,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub span: Span,
    /// `s_c` against every entity alive at this step, in entity order.
    pub scores: Vec<f64>,
    pub decision: Decision,
    /// Gold action, present under teacher forcing.
    pub gold_decision: Option<Decision>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    pub clusters: Vec<Cluster>,
    pub entities: Vec<EntityState>,
    pub trace: Vec<TraceStep>,
}

/// `[x; e; x ⊙ e; g]`.
pub fn pair_input(x: &[f64], e: &[f64], g: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(3 * x.len() + g.len());
    v.extend_from_slice(x);
    v.extend_from_slice(e);
    v.extend(x.iter().zip(e).map(|(a, b)| a * b));
    v.extend_from_slice(g);
    v
}

/// `s_c(x, e) = f_c([x; e; x ⊙ e; g(x, e)])`.
pub fn cluster_score<S: EntityScorer + ?Sized>(
    x: &CandidateSpan,
    e: &EntityState,
    scorer: &S,
) -> Result<f64, EngineError> {
    if x.representation.len() != e.representation.len() {
        return Err(EngineError::DimensionMismatch {
            span: x.representation.len(),
            entity: e.representation.len(),
        });
    }
    let g = scorer.feature_embedding(&PairFeatures::between(x.span, e));
    Ok(scorer.score_pair(&pair_input(&x.representation, &e.representation, &g)))
}

/// Processes spans left to right. A span joins the best-scoring entity when that score
/// is strictly positive and otherwise starts a new entity. Under teacher forcing the
/// decision comes from `gold`, while scores are still computed and traced.
pub fn cluster_document<S: EntityScorer + ?Sized>(
    spans: &[CandidateSpan],
    scorer: &S,
    cfg: &ClusteringConfig,
    gold: Option<&[Cluster]>,
) -> Result<ClusterOutcome, EngineError> {
    if cfg.teacher_forcing != gold.is_some() {
        return Err(EngineError::GoldRequirement);
    }
    for w in spans.windows(2) {
        if w[1].span < w[0].span {
            return Err(EngineError::Unordered(w[1].span, w[0].span));
        }
    }
    let gold_of: HashMap<Span, usize> = gold
        .unwrap_or(&[])
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| c.iter().map(move |s| (*s, ci)))
        .collect();
    let mut entity_of_gold: HashMap<usize, usize> = HashMap::new();

    let mut entities: Vec<EntityState> = Vec::new();
    let mut trace = Vec::with_capacity(spans.len());
    for (step, x) in spans.iter().enumerate() {
        let scores = entities
            .iter()
            .map(|e| cluster_score(x, e, scorer))
            .collect::<Result<Vec<f64>, _>>()?;

        let gold_decision = if cfg.teacher_forcing {
            let gc = *gold_of.get(&x.span).ok_or(EngineError::SpanNotInGold(x.span))?;
            Some(match entity_of_gold.get(&gc) {
                Some(&e) => Decision::Attach(e),
                None => {
                    entity_of_gold.insert(gc, entities.len());
                    Decision::New
                }
            })
        } else {
            None
        };

        let decision = match gold_decision {
            Some(d) => d,
            None => {
                let mut best: Option<(usize, f64)> = None;
                for (j, &s) in scores.iter().enumerate() {
                    if best.is_none_or(|(_, b)| s > b) {
                        best = Some((j, s));
                    }
                }
                match best {
                    Some((j, s)) if s > 0.0 => Decision::Attach(j),
                    _ => Decision::New,
                }
            }
        };

        match decision {
            Decision::Attach(j) => entities[j].absorb(x.span, &x.representation),
            Decision::New => entities.push(EntityState::new(x.span, x.representation.clone())),
        }
        trace.push(TraceStep {
            step,
            span: x.span,
            scores,
            decision,
            gold_decision,
        });
    }

    Ok(ClusterOutcome {
        clusters: entities.iter().map(|e| e.member_spans.clone()).collect(),
        entities,
        trace,
    })
}

#[derive(Debug, Serialize)]
struct TraceRecord<'a> {
    doc_key: &'a str,
    step: usize,
    span: [usize; 2],
    scores: &'a [f64],
    decision: Decision,
}

/// One JSON object per step: `doc_key, step, span, scores, decision`.
pub fn trace_to_jsonl(doc_key: &str, trace: &[TraceStep]) -> String {
    trace
        .iter()
        .map(|t| {
            let rec = TraceRecord {
                doc_key,
                step: t.step,
                span: [t.span.start, t.span.end],
                scores: &t.scores,
                decision: t.decision,
            };
            serde_json::to_string(&rec).expect("trace serializes") + "\n"
        })
        .collect()
}
