//! Independent oracles shared by the integration and acceptance tests. Nothing here
//! calls into the metric or gradient code it is used to check.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use jointcoref::engine::{
    cluster_document, ClusteringConfig, CandidateSpan, Decision, EntityScorer, PairFeatures,
};
use jointcoref::learning::{Model, ModelConfig, Objective, Vocab};
use jointcoref::{Cluster, Document, Span};
use rand::seq::SliceRandom;
use rand::Rng;

// ---------------------------------------------------------------------------
// Random clusterings

/// Distinct random spans inside a 30-token window.
pub fn random_spans<R: Rng>(rng: &mut R, n: usize) -> Vec<Span> {
    let mut set = BTreeSet::new();
    while set.len() < n {
        let start = rng.gen_range(0..30);
        set.insert(Span::new(start, start + rng.gen_range(0..3)));
    }
    let mut v: Vec<Span> = set.into_iter().collect();
    v.shuffle(rng);
    v
}

pub fn random_partition<R: Rng>(rng: &mut R, spans: &[Span]) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> = Vec::new();
    for &s in spans {
        if clusters.is_empty() || rng.gen_bool(0.4) {
            clusters.push(vec![s]);
        } else {
            let i = rng.gen_range(0..clusters.len());
            clusters[i].push(s);
        }
    }
    for c in &mut clusters {
        c.sort();
    }
    clusters
}

/// Gold and predicted clusterings with at most `max_mentions` mentions each, sharing
/// some mentions and differing in others.
pub fn random_pair<R: Rng>(rng: &mut R, max_mentions: usize) -> (Vec<Cluster>, Vec<Cluster>) {
    let pool = random_spans(rng, max_mentions + 4);
    let ng = rng.gen_range(0..=max_mentions);
    let np = rng.gen_range(0..=max_mentions);
    let gold_spans: Vec<Span> = pool.choose_multiple(rng, ng).copied().collect();
    let pred_spans: Vec<Span> = pool.choose_multiple(rng, np).copied().collect();
    (random_partition(rng, &gold_spans), random_partition(rng, &pred_spans))
}

// ---------------------------------------------------------------------------
// Definitional metrics

pub struct Oracle {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

fn oracle(r_num: f64, r_den: f64, p_num: f64, p_den: f64) -> Oracle {
    let recall = if r_den == 0.0 { 0.0 } else { r_num / r_den };
    let precision = if p_den == 0.0 { 0.0 } else { p_num / p_den };
    let f1 = if recall + precision == 0.0 { 0.0 } else { 2.0 * recall * precision / (recall + precision) };
    Oracle { recall, precision, f1 }
}

/// Number of parts `key` is split into by `response`; mentions absent from the
/// response form one part each.
fn parts(key: &[Span], response: &[Cluster]) -> usize {
    let mut labels = BTreeSet::new();
    let mut unmatched = 0;
    for m in key {
        match response.iter().position(|r| r.contains(m)) {
            Some(i) => {
                labels.insert(i);
            }
            None => unmatched += 1,
        }
    }
    labels.len() + unmatched
}

pub fn muc(gold: &[Cluster], pred: &[Cluster]) -> Oracle {
    let side = |k: &[Cluster], r: &[Cluster]| {
        let num: usize = k.iter().map(|c| c.len() - parts(c, r)).sum();
        let den: usize = k.iter().map(|c| c.len() - 1).sum();
        (num as f64, den as f64)
    };
    let (rn, rd) = side(gold, pred);
    let (pn, pd) = side(pred, gold);
    oracle(rn, rd, pn, pd)
}

/// Per-mention B³; both sides empty counts as perfect.
pub fn b_cubed(gold: &[Cluster], pred: &[Cluster]) -> Oracle {
    let side = |k: &[Cluster], r: &[Cluster]| {
        let mut total = 0.0;
        let mut n = 0.0;
        for c in k {
            for m in c {
                n += 1.0;
                if let Some(rc) = r.iter().find(|rc| rc.contains(m)) {
                    let overlap = c.iter().filter(|x| rc.contains(x)).count() as f64;
                    total += overlap / c.len() as f64;
                }
            }
        }
        (total, n)
    };
    let (rn, rd) = side(gold, pred);
    let (pn, pd) = side(pred, gold);
    if rd == 0.0 && pd == 0.0 {
        return Oracle { recall: 1.0, precision: 1.0, f1: 1.0 };
    }
    oracle(rn, rd, pn, pd)
}

pub fn phi4(a: &[Span], b: &[Span]) -> f64 {
    let common = a.iter().filter(|x| b.contains(x)).count() as f64;
    2.0 * common / (a.len() + b.len()) as f64
}

/// Best total weight of a one-to-one matching by exhaustive search over subsets.
pub fn best_matching(weights: &[Vec<f64>]) -> f64 {
    let cols = weights.first().map_or(0, |r| r.len());
    let mut memo: HashMap<(usize, u64), f64> = HashMap::new();
    fn go(i: usize, used: u64, w: &[Vec<f64>], cols: usize, memo: &mut HashMap<(usize, u64), f64>) -> f64 {
        if i == w.len() {
            return 0.0;
        }
        if let Some(v) = memo.get(&(i, used)) {
            return *v;
        }
        let mut best = go(i + 1, used, w, cols, memo);
        for j in 0..cols {
            if used & (1 << j) == 0 {
                best = best.max(w[i][j] + go(i + 1, used | (1 << j), w, cols, memo));
            }
        }
        memo.insert((i, used), best);
        best
    }
    go(0, 0, weights, cols, &mut memo)
}

/// Best matching by enumerating every permutation of the larger side.
pub fn best_matching_by_permutation(weights: &[Vec<f64>]) -> f64 {
    let rows = weights.len();
    let cols = weights.first().map_or(0, |r| r.len());
    let n = rows.max(cols);
    let at = |i: usize, j: usize| if i < rows && j < cols { weights[i][j] } else { 0.0 };
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::NEG_INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let total: f64 = (0..n).map(|i| at(i, p[i])).sum();
        best = best.max(total);
    });
    if n == 0 {
        0.0
    } else {
        best
    }
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

pub fn ceaf_e(gold: &[Cluster], pred: &[Cluster]) -> Oracle {
    let w: Vec<Vec<f64>> = gold.iter().map(|g| pred.iter().map(|p| phi4(g, p)).collect()).collect();
    let sim = best_matching(&w);
    oracle(sim, gold.len() as f64, sim, pred.len() as f64)
}

pub fn conll(gold: &[Cluster], pred: &[Cluster]) -> f64 {
    (muc(gold, pred).f1 + b_cubed(gold, pred).f1 + ceaf_e(gold, pred).f1) / 3.0
}

// ---------------------------------------------------------------------------
// Engine invariants

/// Random pair scorer: `tanh(w · input) + bias` over two scaled raw features.
pub struct RandomScorer {
    pub w: Vec<f64>,
    pub bias: f64,
}

impl EntityScorer for RandomScorer {
    fn feature_embedding(&self, f: &PairFeatures) -> Vec<f64> {
        vec![f.mention_count as f64 * 0.1, (f.distance as f64).ln_1p() * 0.1]
    }
    fn score_pair(&self, input: &[f64]) -> f64 {
        self.w.iter().zip(input).map(|(a, b)| a * b).sum::<f64>().tanh() + self.bias
    }
}

pub fn random_candidates<R: Rng>(rng: &mut R, n: usize, dim: usize) -> Vec<CandidateSpan> {
    let mut spans = random_spans(rng, n);
    spans.sort();
    spans
        .into_iter()
        .map(|span| CandidateSpan {
            span,
            representation: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            mention_score: rng.gen_range(-1.0..1.0),
        })
        .collect()
}

/// Checks partition, prefix causality and the running-mean update for one random
/// run. Returns a description of the first violation.
pub fn check_engine_run<R: Rng>(rng: &mut R) -> Result<(), String> {
    let dim = rng.gen_range(1..6);
    let n = rng.gen_range(0..25);
    let cands = random_candidates(rng, n, dim);
    let scorer = RandomScorer {
        w: (0..3 * dim + 2).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        bias: rng.gen_range(-0.5..0.5),
    };
    let cfg = ClusteringConfig::default();
    let full = cluster_document(&cands, &scorer, &cfg, None).map_err(|e| e.to_string())?;

    // Partition: every input span in exactly one cluster, nothing else.
    let mut seen: Vec<Span> = full.clusters.iter().flatten().copied().collect();
    seen.sort();
    let mut input: Vec<Span> = cands.iter().map(|c| c.span).collect();
    input.sort();
    if seen != input {
        return Err("clusters do not partition the input spans".into());
    }

    // Prefix causality: decisions on a prefix do not depend on later spans.
    let cut = if n == 0 { 0 } else { rng.gen_range(0..=n) };
    let prefix = cluster_document(&cands[..cut], &scorer, &cfg, None).map_err(|e| e.to_string())?;
    if prefix.trace[..] != full.trace[..cut] {
        return Err(format!("prefix of length {cut} diverges"));
    }

    // Entity representation equals the mean of its members' representations.
    let rep: HashMap<Span, &Vec<f64>> = cands.iter().map(|c| (c.span, &c.representation)).collect();
    for e in &full.entities {
        if e.mention_count != e.member_spans.len() {
            return Err("mention_count differs from member count".into());
        }
        for k in 0..dim {
            let mean = e.member_spans.iter().map(|s| rep[s][k]).sum::<f64>() / e.member_spans.len() as f64;
            if (mean - e.representation[k]).abs() > 1e-9 {
                return Err(format!("entity mean off by {}", (mean - e.representation[k]).abs()));
            }
        }
    }
    // Decisions are consistent with the rule: attach iff best score > 0.
    for t in &full.trace {
        let best = t.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let attach = matches!(t.decision, Decision::Attach(_));
        if attach != (best > 0.0) {
            return Err(format!("step {} decision disagrees with threshold", t.step));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Finite differences

pub fn tiny_model_config<R: Rng>(rng: &mut R) -> ModelConfig {
    let use_genre = rng.gen_bool(0.5);
    ModelConfig {
        embed_dim: rng.gen_range(2..5),
        tf_dim: rng.gen_range(0..3),
        width_dim: rng.gen_range(1..3),
        feature_dim: rng.gen_range(1..3),
        hidden: rng.gen_range(3..6),
        use_speakers: true,
        use_genre,
        freeze_genre: use_genre && rng.gen_bool(0.3),
        clustering: ClusteringConfig {
            max_mention_len: 4,
            top_k_ratio: 1.0,
            ..Default::default()
        },
        seed: rng.gen(),
    }
}

/// A short random document with gold clusters, optional speakers and genre.
pub fn tiny_document<R: Rng>(rng: &mut R) -> Document {
    const WORDS: [&str; 8] = ["Ana", "Bo", "saw", "the", "cat", "and", "it", "ran"];
    let n = rng.gen_range(5..11);
    let tokens: Vec<String> = (0..n).map(|_| WORDS.choose(rng).unwrap().to_string()).collect();
    let mid = n / 2;
    let mut doc = Document::from_sentences("tiny", vec![tokens[..mid].to_vec(), tokens[mid..].to_vec()], "tiny");
    let mut spans = BTreeSet::new();
    for _ in 0..rng.gen_range(1..6) {
        let s = rng.gen_range(0..n);
        spans.insert(Span::new(s, (s + rng.gen_range(0..3)).min(n - 1)));
    }
    let spans: Vec<Span> = spans.into_iter().collect();
    doc.clusters = random_partition(rng, &spans);
    if rng.gen_bool(0.5) {
        doc.speakers = Some((0..n).map(|i| if i < mid { "Ana".into() } else { "Bo Li".into() }).collect());
    }
    if rng.gen_bool(0.5) {
        doc.genre = Some(["nw", "bc"].choose(rng).unwrap().to_string());
    }
    doc
}

pub fn tiny_model(cfg: ModelConfig, doc: &Document) -> Model {
    let mut toks: Vec<String> = doc.tokens.clone();
    toks.extend(["[SPK]", "[/SPK]", "Li"].map(String::from));
    Model::new(cfg, Vocab::build(toks), Vocab::build(["nw", "bc"])).unwrap()
}

/// Relative error `‖a − n‖ / max(‖a‖, ‖n‖)` for every parameter block, comparing
/// the analytic gradient against central differences with step `h`.
pub fn gradient_errors(model: &mut Model, doc: &Document, objective: Objective, h: f64) -> Vec<(String, f64)> {
    model.params.zero_grad();
    model.document_loss(doc, objective).unwrap();
    let analytic: Vec<Vec<f64>> = model.params.params().iter().map(|p| p.grad.clone()).collect();
    let names: Vec<String> = model.params.params().iter().map(|p| p.name.clone()).collect();

    let mut out = Vec::new();
    for (b, name) in names.iter().enumerate() {
        let len = analytic[b].len();
        let mut numeric = vec![0.0; len];
        for k in 0..len {
            let orig = model.params.params()[b].value[k];
            model.params.params_mut()[b].value[k] = orig + h;
            let up = model.document_loss(doc, objective).unwrap();
            model.params.params_mut()[b].value[k] = orig - h;
            let down = model.document_loss(doc, objective).unwrap();
            model.params.params_mut()[b].value[k] = orig;
            numeric[k] = (up - down) / (2.0 * h);
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic[b].iter().zip(&numeric).map(|(a, n)| a - n).collect();
        let scale = norm(&analytic[b]).max(norm(&numeric));
        let rel = if scale < 1e-9 { 0.0 } else { norm(&diff) / scale };
        out.push((name.clone(), rel));
    }
    out
}

// ---------------------------------------------------------------------------
// Random corpora for round trips

fn crosses(a: Span, b: Span) -> bool {
    (a.start < b.start && b.start <= a.end && a.end < b.end) || (b.start < a.start && a.start <= b.end && b.end < a.end)
}

/// A small corpus exercising sentence splits, nested and adjacent spans, singletons,
/// speakers and genres. Same-cluster spans never cross (CoNLL cannot encode that).
pub fn random_corpus<R: Rng>(rng: &mut R) -> jointcoref::Corpus {
    const WORDS: [&str; 8] = ["the", "Ann", "said", "\"hi\"", "(x)", "é", "-", "3.5"];
    const SPEAKERS: [&str; 3] = ["A", "B_c", "Dee"];
    let docs = (0..rng.gen_range(1..4))
        .map(|i| {
            let sentences: Vec<Vec<String>> = (0..rng.gen_range(1..4))
                .map(|_| (0..rng.gen_range(1..7)).map(|_| WORDS.choose(rng).unwrap().to_string()).collect())
                .collect();
            let genre = rng.gen_bool(0.5).then(|| ["nw", "bc"].choose(rng).unwrap().to_string());
            let part = rng.gen_range(0..3);
            let key = match &genre {
                Some(g) => format!("{g}/d{i}_{part}"),
                None => format!("d{i}_{part}"),
            };
            let mut doc = Document::from_sentences(key, sentences, "pt");
            doc.genre = genre;
            let n = doc.tokens.len();
            let mut used = BTreeSet::new();
            let mut clusters: Vec<Cluster> = vec![Vec::new(); 4];
            for _ in 0..rng.gen_range(0..8) {
                let s = rng.gen_range(0..n);
                let span = Span::new(s, (s + rng.gen_range(0..3)).min(n - 1));
                if !used.insert(span) {
                    continue;
                }
                let c = rng.gen_range(0..4);
                if clusters[c].iter().any(|o| crosses(*o, span)) {
                    clusters.push(vec![span]);
                } else {
                    clusters[c].push(span);
                }
            }
            clusters.retain(|c| !c.is_empty());
            for c in &mut clusters {
                c.sort();
            }
            doc.clusters = clusters;
            if rng.gen_bool(0.5) {
                let mut speakers = Vec::with_capacity(n);
                let mut start = 0;
                for &end in &doc.sentence_boundaries {
                    let who = SPEAKERS.choose(rng).unwrap().to_string();
                    speakers.extend(std::iter::repeat_n(who, end - start));
                    start = end;
                }
                doc.speakers = Some(speakers);
            }
            doc
        })
        .collect();
    jointcoref::Corpus::new(jointcoref::DatasetProfile::new("pt", true), docs, jointcoref::Split::Dev)
}
