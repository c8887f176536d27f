//! Coreference scoring.
//!
//! Degenerate denominators never produce NaN: the affected value is reported as 0 and
//! the `degenerate` flag is raised.

pub mod assignment;
pub mod coref;
pub mod report;
pub mod tasks;

use std::collections::HashMap;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Cluster, Corpus, DatasetProfile, Document};

pub use coref::{b_cubed, ceaf_e, conll_f1, mention_f1, muc};
pub use report::macro_average;
pub use tasks::{choice_accuracy, pair_f1, ChoiceTask, PairTask};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no scores to aggregate")]
    Empty,
    #[error("task for document {0:?} has no candidates")]
    EmptyTask(String),
    #[error("task for document {doc_key:?}: {message}")]
    InvalidTask { doc_key: String, message: String },
}

/// Numerators and denominators of precision and recall.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub p_num: f64,
    pub p_den: f64,
    pub r_num: f64,
    pub r_den: f64,
}

impl AddAssign for Tally {
    fn add_assign(&mut self, o: Tally) {
        self.p_num += o.p_num;
        self.p_den += o.p_den;
        self.r_num += o.r_num;
        self.r_den += o.r_den;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default)]
    pub degenerate: bool,
}

impl Prf {
    pub fn from_tally(t: &Tally) -> Prf {
        let mut degenerate = false;
        let mut ratio = |num: f64, den: f64| {
            if den > 0.0 {
                num / den
            } else {
                degenerate = true;
                0.0
            }
        };
        let precision = ratio(t.p_num, t.p_den);
        let recall = ratio(t.r_num, t.r_den);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
            degenerate,
        }
    }

    /// Like [`Prf::from_tally`], but an empty gold and empty prediction scores 1.
    pub fn from_tally_empty_is_perfect(t: &Tally) -> Prf {
        if t.p_den == 0.0 && t.r_den == 0.0 {
            return Prf {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                degenerate: true,
            };
        }
        Prf::from_tally(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingletonSplit {
    /// Plain set F1 between gold and predicted size-1 clusters.
    pub singleton: Prf,
    /// CoNLL F1 with clusters of size 1 removed from both sides.
    pub non_singleton_conll_f1: f64,
    /// Set when gold has no singletons, making `singleton` undefined.
    pub no_gold_singletons: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub muc: Prf,
    pub b_cubed: Prf,
    pub ceaf_e: Prf,
    pub conll_f1: f64,
    pub mention: Prf,
    pub singleton_split: Option<SingletonSplit>,
    /// Predicted singletons were removed because the dataset does not annotate them.
    pub predicted_singletons_stripped: bool,
    pub documents: usize,
    /// Gold documents with no prediction; scored against an empty prediction.
    pub missing_predictions: Vec<String>,
}

/// Per-document tallies, summed over a corpus.
#[derive(Debug, Clone, Copy, Default)]
pub struct CorpusTally {
    pub muc: Tally,
    pub b_cubed: Tally,
    pub ceaf_e: Tally,
    pub mention: Tally,
    pub singleton: Tally,
    pub ns_muc: Tally,
    pub ns_b_cubed: Tally,
    pub ns_ceaf_e: Tally,
}

impl CorpusTally {
    pub fn add_document(&mut self, gold: &[Cluster], pred: &[Cluster]) {
        self.muc += coref::muc_tally(gold, pred);
        self.b_cubed += coref::b_cubed_tally(gold, pred);
        self.ceaf_e += coref::ceaf_e_tally(gold, pred);
        self.mention += coref::mention_tally(gold, pred);
        self.singleton += coref::singleton_tally(gold, pred);
        let g = coref::non_singletons(gold);
        let p = coref::non_singletons(pred);
        self.ns_muc += coref::muc_tally(&g, &p);
        self.ns_b_cubed += coref::b_cubed_tally(&g, &p);
        self.ns_ceaf_e += coref::ceaf_e_tally(&g, &p);
    }

    pub fn singleton_split(&self) -> SingletonSplit {
        let ns = (Prf::from_tally(&self.ns_muc).f1
            + Prf::from_tally_empty_is_perfect(&self.ns_b_cubed).f1
            + Prf::from_tally(&self.ns_ceaf_e).f1)
            / 3.0;
        SingletonSplit {
            singleton: Prf::from_tally(&self.singleton),
            non_singleton_conll_f1: ns,
            no_gold_singletons: self.singleton.r_den == 0.0,
        }
    }
}

/// Singleton split for one document.
pub fn singleton_split_score(gold: &[Cluster], pred: &[Cluster]) -> SingletonSplit {
    let mut t = CorpusTally::default();
    t.add_document(gold, pred);
    t.singleton_split()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreOptions {
    pub split_singletons: bool,
}

/// Drops predicted size-1 clusters when the profile does not annotate singletons.
pub fn apply_singleton_policy(profile: &DatasetProfile, pred: &[Cluster]) -> (Vec<Cluster>, bool) {
    if profile.annotates_singletons {
        (pred.to_vec(), false)
    } else {
        let kept: Vec<Cluster> = pred.iter().filter(|c| c.len() > 1).cloned().collect();
        let stripped = kept.len() != pred.len();
        (kept, stripped)
    }
}

/// Micro-averaged report of predictions against a gold corpus, matched by doc_key.
pub fn score_corpus(gold: &Corpus, pred: &[Document], opts: ScoreOptions) -> MetricReport {
    let by_key: HashMap<&str, &Document> = pred.iter().map(|d| (d.doc_key.as_str(), d)).collect();
    let mut tally = CorpusTally::default();
    let mut missing = Vec::new();
    let mut stripped_any = false;
    for doc in &gold.documents {
        let pred_clusters: &[Cluster] = match by_key.get(doc.doc_key.as_str()) {
            Some(p) => &p.clusters,
            None => {
                missing.push(doc.doc_key.clone());
                &[]
            }
        };
        let (pred_clusters, stripped) = apply_singleton_policy(&gold.profile, pred_clusters);
        stripped_any |= stripped;
        tally.add_document(&doc.clusters, &pred_clusters);
    }
    let muc = Prf::from_tally(&tally.muc);
    let b_cubed = Prf::from_tally_empty_is_perfect(&tally.b_cubed);
    let ceaf_e = Prf::from_tally(&tally.ceaf_e);
    MetricReport {
        conll_f1: (muc.f1 + b_cubed.f1 + ceaf_e.f1) / 3.0,
        muc,
        b_cubed,
        ceaf_e,
        mention: Prf::from_tally(&tally.mention),
        singleton_split: opts.split_singletons.then(|| tally.singleton_split()),
        predicted_singletons_stripped: stripped_any,
        documents: gold.documents.len(),
        missing_predictions: missing,
    }
}
