//! Pseudo-singleton augmentation: a mention detector trained on a corpus without
//! singleton annotation scores every candidate span; the best-scoring spans that are
//! not gold mentions are added back as size-1 clusters.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Span};
use crate::formats::FormatError;
use crate::learning::{self, LearningError, Model, ModelConfig, Objective, TrainConfig, TrainOutcome};
use crate::mixer::{self, Cap, MixEntry, MixError, MixSpec};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error(transparent)]
    Mix(#[from] MixError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("corpus is already augmented")]
    AlreadyAugmented,
    #[error("plan refers to unknown document {0}")]
    UnknownDocument(String),
    #[error("{doc_key}: span {span} is a gold mention")]
    GoldSpan { doc_key: String, span: Span },
    #[error("{doc_key}: span {span} lies outside the document")]
    OutOfRange { doc_key: String, span: Span },
    #[error("{doc_key}: span {span} appears twice in the plan")]
    DuplicateSpan { doc_key: String, span: Span },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSpan {
    pub span: Span,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocScores {
    pub doc_key: String,
    /// Non-gold candidates, best first (ties by span order).
    pub spans: Vec<ScoredSpan>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MentionScoreTable {
    pub docs: Vec<DocScores>,
}

impl MentionScoreTable {
    pub fn available(&self) -> usize {
        self.docs.iter().map(|d| d.spans.len()).sum()
    }
}

/// Trains only the proposal stage (`s_m`) on `corpus`, one document per step.
pub fn train_mention_detector(
    corpus: &Corpus,
    model_cfg: ModelConfig,
    train_cfg: &TrainConfig,
    dev: &[Corpus],
) -> Result<TrainOutcome, AugmentError> {
    mixer::check_dev(dev)?;
    let model = Model::for_corpora(model_cfg, &[corpus])?;
    let spec = MixSpec::new(vec![MixEntry { corpus, cap: Cap::All }], train_cfg.seed)?;
    let docs = mixer::stream(&spec, train_cfg.steps).map(|item| item.doc);
    Ok(learning::train(model, docs, dev, train_cfg, Objective::MentionOnly)?)
}

/// Scores every candidate span and keeps those that are not gold mentions.
pub fn harvest_scores(corpus: &Corpus, detector: &Model) -> MentionScoreTable {
    let docs = corpus
        .documents
        .iter()
        .map(|d| {
            let gold: HashSet<Span> = d.mentions().into_iter().collect();
            let mut spans: Vec<ScoredSpan> = detector
                .score_all_spans(d)
                .into_iter()
                .filter(|(s, _)| !gold.contains(s))
                .map(|(span, score)| ScoredSpan { span, score })
                .collect();
            spans.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.span.cmp(&b.span)));
            DocScores {
                doc_key: d.doc_key.clone(),
                spans,
            }
        })
        .collect();
    MentionScoreTable { docs }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub doc_key: String,
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

impl PlanEntry {
    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentPlan {
    /// Requested number of pseudo-singletons.
    pub total_n: usize,
    /// Chosen spans in global rank order.
    pub entries: Vec<PlanEntry>,
}

impl AugmentPlan {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fewer candidates were available than requested.
    pub fn is_short(&self) -> bool {
        self.entries.len() < self.total_n
    }

    pub fn per_document(&self) -> BTreeMap<&str, Vec<Span>> {
        let mut m: BTreeMap<&str, Vec<Span>> = BTreeMap::new();
        for e in &self.entries {
            m.entry(e.doc_key.as_str()).or_default().push(e.span());
        }
        m
    }
}

/// Strict global top-`total_n` by score; ties broken by doc_key, then span order.
pub fn build_plan(table: &MentionScoreTable, total_n: usize) -> AugmentPlan {
    let mut all: Vec<PlanEntry> = table
        .docs
        .iter()
        .flat_map(|d| {
            d.spans.iter().map(|s| PlanEntry {
                doc_key: d.doc_key.clone(),
                start: s.span.start,
                end: s.span.end,
                score: s.score,
            })
        })
        .collect();
    all.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.doc_key.cmp(&b.doc_key))
            .then(a.span().cmp(&b.span()))
    });
    all.truncate(total_n);
    AugmentPlan { total_n, entries: all }
}

/// Appends every planned span as a size-1 cluster and marks the corpus augmented.
pub fn apply_plan(corpus: &Corpus, plan: &AugmentPlan) -> Result<Corpus, AugmentError> {
    if corpus.augmented {
        return Err(AugmentError::AlreadyAugmented);
    }
    let mut out = corpus.clone();
    let index: BTreeMap<String, usize> = out
        .documents
        .iter()
        .enumerate()
        .map(|(i, d)| (d.doc_key.clone(), i))
        .collect();
    for (key, mut spans) in plan.per_document() {
        let &di = index.get(key).ok_or_else(|| AugmentError::UnknownDocument(key.to_string()))?;
        let doc = &mut out.documents[di];
        let gold: HashSet<Span> = doc.mentions().into_iter().collect();
        spans.sort();
        let mut seen = HashSet::new();
        for span in spans {
            let err_key = || key.to_string();
            if span.end >= doc.tokens.len() || span.start > span.end {
                return Err(AugmentError::OutOfRange { doc_key: err_key(), span });
            }
            if gold.contains(&span) {
                return Err(AugmentError::GoldSpan { doc_key: err_key(), span });
            }
            if !seen.insert(span) {
                return Err(AugmentError::DuplicateSpan { doc_key: err_key(), span });
            }
            doc.clusters.push(vec![span]);
        }
    }
    out.augmented = true;
    Ok(out)
}

pub fn plan_to_jsonl(plan: &AugmentPlan) -> String {
    plan.entries
        .iter()
        .map(|e| serde_json::to_string(e).expect("plan entry serializes") + "\n")
        .collect()
}

pub fn parse_plan(text: &str) -> Result<AugmentPlan, FormatError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: PlanEntry = serde_json::from_str(line).map_err(|source| FormatError::Json { line: i + 1, source })?;
        entries.push(e);
    }
    Ok(AugmentPlan {
        total_n: entries.len(),
        entries,
    })
}

pub fn write_plan(plan: &AugmentPlan, path: &Path) -> Result<(), FormatError> {
    std::fs::write(path, plan_to_jsonl(plan)).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_plan(path: &Path) -> Result<AugmentPlan, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_plan(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DatasetProfile, Document, Split};

    fn corpus() -> Corpus {
        let mut d = Document::from_sentences("a", vec![(0..6).map(|i| format!("t{i}")).collect()], "on");
        d.clusters = vec![vec![Span::new(0, 0), Span::new(3, 4)]];
        let mut e = Document::from_sentences("b", vec![(0..3).map(|i| format!("t{i}")).collect()], "on");
        e.clusters = vec![vec![Span::new(0, 0), Span::new(2, 2)]];
        Corpus::new(DatasetProfile::new("on", false), vec![d, e], Split::Train)
    }

    fn table() -> MentionScoreTable {
        let s = |a, b, score| ScoredSpan { span: Span::new(a, b), score };
        MentionScoreTable {
            docs: vec![
                DocScores { doc_key: "a".into(), spans: vec![s(1, 1, 3.0), s(2, 2, 1.0), s(1, 2, 0.5)] },
                DocScores { doc_key: "b".into(), spans: vec![s(1, 1, 3.0), s(0, 1, 2.0)] },
            ],
        }
    }

    #[test]
    fn global_top_with_tie_break() {
        let plan = build_plan(&table(), 3);
        let got: Vec<(String, Span)> = plan.entries.iter().map(|e| (e.doc_key.clone(), e.span())).collect();
        assert_eq!(
            got,
            vec![("a".into(), Span::new(1, 1)), ("b".into(), Span::new(1, 1)), ("b".into(), Span::new(0, 1))]
        );
        assert!(build_plan(&table(), 0).is_empty());
        let all = build_plan(&table(), 100);
        assert_eq!(all.len(), 5);
        assert!(all.is_short());
    }

    #[test]
    fn apply_adds_singletons_once() {
        let c = corpus();
        let plan = build_plan(&table(), 1);
        let aug = apply_plan(&c, &plan).unwrap();
        assert!(aug.augmented);
        assert_eq!(aug.documents[0].clusters.len(), 2);
        assert_eq!(aug.documents[0].clusters[0], c.documents[0].clusters[0]);
        assert_eq!(aug.documents[1], c.documents[1]);
        assert!(matches!(apply_plan(&aug, &plan), Err(AugmentError::AlreadyAugmented)));
        let restored: Vec<Document> = aug.documents.iter().map(|d| d.without_singletons()).collect();
        assert_eq!(restored, c.documents);
    }

    #[test]
    fn apply_rejects_gold_and_unknown() {
        let c = corpus();
        let bad = AugmentPlan {
            total_n: 1,
            entries: vec![PlanEntry { doc_key: "a".into(), start: 3, end: 4, score: 1.0 }],
        };
        assert!(matches!(apply_plan(&c, &bad), Err(AugmentError::GoldSpan { .. })));
        let bad = AugmentPlan {
            total_n: 1,
            entries: vec![PlanEntry { doc_key: "zz".into(), start: 0, end: 0, score: 1.0 }],
        };
        assert!(matches!(apply_plan(&c, &bad), Err(AugmentError::UnknownDocument(_))));
    }

    #[test]
    fn plan_jsonl_round_trip() {
        let plan = build_plan(&table(), 4);
        let back = parse_plan(&plan_to_jsonl(&plan)).unwrap();
        assert_eq!(back.entries, plan.entries);
        let line = plan_to_jsonl(&plan).lines().next().unwrap().to_string();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v, serde_json::json!({"doc_key": "a", "start": 1, "end": 1, "score": 3.0}));
    }
}
