//! MUC, B-cubed and CEAF-e over the clusters of a single document.
//!
//! Each metric returns a [`Tally`] of numerators and denominators so that corpus
//! scores can be micro-aggregated the same way the reference scorer does.

use std::collections::{HashMap, HashSet};

use crate::corpus::{Cluster, Span};

use super::assignment::max_weight_assignment;
use super::{Prf, Tally};

fn cluster_index(clusters: &[Cluster]) -> HashMap<Span, usize> {
    let mut idx = HashMap::new();
    for (i, c) in clusters.iter().enumerate() {
        for &s in c {
            idx.entry(s).or_insert(i);
        }
    }
    idx
}

fn dedup(cluster: &Cluster) -> Vec<Span> {
    let mut c = cluster.clone();
    c.sort();
    c.dedup();
    c
}

/// Link-based recall side of MUC: `Σ(|K| − |p(K)|)` over `Σ(|K| − 1)`.
fn muc_side(keys: &[Cluster], responses: &[Cluster]) -> (f64, f64) {
    let resp = cluster_index(responses);
    let mut num = 0.0;
    let mut den = 0.0;
    for key in keys {
        let key = dedup(key);
        if key.is_empty() {
            continue;
        }
        let mut parts = HashSet::new();
        let mut unaligned = 0usize;
        for s in &key {
            match resp.get(s) {
                Some(&r) => {
                    parts.insert(r);
                }
                None => unaligned += 1,
            }
        }
        let partitions = parts.len() + unaligned;
        num += (key.len() - partitions) as f64;
        den += (key.len() - 1) as f64;
    }
    (num, den)
}

pub fn muc_tally(gold: &[Cluster], pred: &[Cluster]) -> Tally {
    let (r_num, r_den) = muc_side(gold, pred);
    let (p_num, p_den) = muc_side(pred, gold);
    Tally { p_num, p_den, r_num, r_den }
}

fn b_cubed_side(keys: &[Cluster], responses: &[Cluster]) -> (f64, f64) {
    let resp: Vec<Vec<Span>> = responses.iter().map(dedup).collect();
    let resp_of = cluster_index(responses);
    let mut num = 0.0;
    let mut den = 0.0;
    for key in keys {
        let key = dedup(key);
        let key_set: HashSet<Span> = key.iter().copied().collect();
        for s in &key {
            den += 1.0;
            if let Some(&r) = resp_of.get(s) {
                let overlap = resp[r].iter().filter(|m| key_set.contains(m)).count();
                num += overlap as f64 / key.len() as f64;
            }
        }
    }
    (num, den)
}

pub fn b_cubed_tally(gold: &[Cluster], pred: &[Cluster]) -> Tally {
    let (r_num, r_den) = b_cubed_side(gold, pred);
    let (p_num, p_den) = b_cubed_side(pred, gold);
    Tally { p_num, p_den, r_num, r_den }
}

/// Entity similarity `φ4(K, R) = 2|K ∩ R| / (|K| + |R|)`.
pub fn phi4(key: &[Span], response: &[Span]) -> f64 {
    let k: HashSet<&Span> = key.iter().collect();
    let r: HashSet<&Span> = response.iter().collect();
    if k.is_empty() && r.is_empty() {
        return 0.0;
    }
    2.0 * k.intersection(&r).count() as f64 / (k.len() + r.len()) as f64
}

/// Best total similarity under a one-to-one alignment of gold to predicted clusters.
pub fn ceaf_e_similarity(gold: &[Cluster], pred: &[Cluster]) -> f64 {
    let gold: Vec<Vec<Span>> = gold.iter().map(dedup).filter(|c| !c.is_empty()).collect();
    let pred: Vec<Vec<Span>> = pred.iter().map(dedup).filter(|c| !c.is_empty()).collect();
    if gold.is_empty() || pred.is_empty() {
        return 0.0;
    }
    let sim: Vec<Vec<f64>> = gold
        .iter()
        .map(|k| pred.iter().map(|r| phi4(k, r)).collect())
        .collect();
    let assignment = max_weight_assignment(&sim);
    assignment
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| sim[i][j]))
        .sum()
}

pub fn ceaf_e_tally(gold: &[Cluster], pred: &[Cluster]) -> Tally {
    let total = ceaf_e_similarity(gold, pred);
    let count = |cs: &[Cluster]| cs.iter().filter(|c| !c.is_empty()).count() as f64;
    Tally {
        p_num: total,
        p_den: count(pred),
        r_num: total,
        r_den: count(gold),
    }
}

pub fn muc(gold: &[Cluster], pred: &[Cluster]) -> Prf {
    Prf::from_tally(&muc_tally(gold, pred))
}

pub fn b_cubed(gold: &[Cluster], pred: &[Cluster]) -> Prf {
    Prf::from_tally_empty_is_perfect(&b_cubed_tally(gold, pred))
}

pub fn ceaf_e(gold: &[Cluster], pred: &[Cluster]) -> Prf {
    Prf::from_tally(&ceaf_e_tally(gold, pred))
}

/// Mean of the MUC, B-cubed and CEAF-e F1 scores.
pub fn conll_f1(gold: &[Cluster], pred: &[Cluster]) -> f64 {
    (muc(gold, pred).f1 + b_cubed(gold, pred).f1 + ceaf_e(gold, pred).f1) / 3.0
}

/// Exact-span set overlap tally between two mention sets.
pub fn set_tally(gold: &HashSet<Span>, pred: &HashSet<Span>) -> Tally {
    let hits = gold.intersection(pred).count() as f64;
    Tally {
        p_num: hits,
        p_den: pred.len() as f64,
        r_num: hits,
        r_den: gold.len() as f64,
    }
}

pub fn mention_tally(gold: &[Cluster], pred: &[Cluster]) -> Tally {
    let g: HashSet<Span> = gold.iter().flatten().copied().collect();
    let p: HashSet<Span> = pred.iter().flatten().copied().collect();
    set_tally(&g, &p)
}

pub fn mention_f1(gold: &[Cluster], pred: &[Cluster]) -> Prf {
    Prf::from_tally(&mention_tally(gold, pred))
}

pub fn singleton_tally(gold: &[Cluster], pred: &[Cluster]) -> Tally {
    let singles = |cs: &[Cluster]| -> HashSet<Span> {
        cs.iter()
            .map(dedup)
            .filter(|c| c.len() == 1)
            .map(|c| c[0])
            .collect()
    };
    set_tally(&singles(gold), &singles(pred))
}

pub fn non_singletons(clusters: &[Cluster]) -> Vec<Cluster> {
    clusters.iter().filter(|c| dedup(c).len() >= 2).cloned().collect()
}
