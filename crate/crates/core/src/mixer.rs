//! Joint-training streams: per-epoch downsampling caps, global shuffling, and the
//! pseudo-singleton/cap tuning grid.

use std::fmt;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, DatasetProfile, Document, Split};

/// Pseudo-singletons that worked best for OntoNotes-only training.
pub const DEFAULT_PSEUDO_SINGLETONS_SINGLE: usize = 60_000;
/// Pseudo-singletons that worked best for joint training.
pub const DEFAULT_PSEUDO_SINGLETONS_JOINT: usize = 30_000;

#[derive(Debug, Error, PartialEq)]
pub enum MixError {
    #[error("mix spec has no corpora")]
    EmptySpec,
    #[error("{0}: a per-epoch cap must be positive")]
    ZeroCap(String),
    #[error("{0}: only training splits can be mixed, found {1}")]
    NotTrainSplit(String, Split),
    #[error("{0}: augmented corpora cannot be used for evaluation")]
    AugmentedDev(String),
    #[error("mix spec yields empty epochs")]
    EmptyEpoch,
    #[error("invalid cap {0:?}: expected \"all\" or a positive integer")]
    BadCap(String),
}

/// Per-epoch document cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cap {
    All,
    Count(usize),
}

impl Cap {
    pub fn effective(&self, available: usize) -> usize {
        match self {
            Cap::All => available,
            Cap::Count(n) => (*n).min(available),
        }
    }
}

impl fmt::Display for Cap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cap::All => f.write_str("all"),
            Cap::Count(n) => write!(f, "{n}"),
        }
    }
}

impl std::str::FromStr for Cap {
    type Err = MixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(Cap::All);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Cap::Count(n)),
            _ => Err(MixError::BadCap(s.to_string())),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CapRepr {
    Count(usize),
    Word(String),
}

impl Serialize for Cap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cap::All => CapRepr::Word("all".into()),
            Cap::Count(n) => CapRepr::Count(*n),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Cap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match CapRepr::deserialize(d)? {
            CapRepr::Count(0) => Err(serde::de::Error::custom("cap must be positive")),
            CapRepr::Count(n) => Ok(Cap::Count(n)),
            CapRepr::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MixEntry<'a> {
    pub corpus: &'a Corpus,
    pub cap: Cap,
}

#[derive(Debug, Clone)]
pub struct MixSpec<'a> {
    pub entries: Vec<MixEntry<'a>>,
    pub seed: u64,
}

impl<'a> MixSpec<'a> {
    pub fn new(entries: Vec<MixEntry<'a>>, seed: u64) -> Result<Self, MixError> {
        if entries.is_empty() {
            return Err(MixError::EmptySpec);
        }
        for e in &entries {
            if e.cap == Cap::Count(0) {
                return Err(MixError::ZeroCap(e.corpus.profile.name.clone()));
            }
            if e.corpus.split != Split::Train {
                return Err(MixError::NotTrainSplit(e.corpus.profile.name.clone(), e.corpus.split));
            }
        }
        let spec = MixSpec { entries, seed };
        if spec.epoch_length() == 0 {
            return Err(MixError::EmptyEpoch);
        }
        Ok(spec)
    }

    /// `Σ min(cap, |corpus|)`.
    pub fn epoch_length(&self) -> usize {
        self.entries.iter().map(|e| e.cap.effective(e.corpus.len())).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanItem {
    pub dataset_tag: String,
    pub doc_key: String,
    #[serde(skip)]
    pub(crate) entry: usize,
    #[serde(skip)]
    pub(crate) doc: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochPlan {
    pub epoch: usize,
    pub items: Vec<PlanItem>,
}

impl EpochPlan {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn count_of(&self, dataset_tag: &str) -> usize {
        self.items.iter().filter(|i| i.dataset_tag == dataset_tag).count()
    }
}

/// Samples `min(cap, |corpus|)` documents per corpus without replacement, freshly for
/// every epoch, then shuffles the union. Fully determined by `(spec.seed, epoch)`.
pub fn build_epoch(spec: &MixSpec<'_>, epoch: usize) -> EpochPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(epoch as u64);
    let mut items = Vec::with_capacity(spec.epoch_length());
    for (ei, e) in spec.entries.iter().enumerate() {
        let n = e.corpus.len();
        let k = e.cap.effective(n);
        let chosen = if k == n {
            (0..n).collect::<Vec<_>>()
        } else {
            index::sample(&mut rng, n, k).into_vec()
        };
        for d in chosen {
            let doc = &e.corpus.documents[d];
            items.push(PlanItem {
                dataset_tag: e.corpus.profile.name.clone(),
                doc_key: doc.doc_key.clone(),
                entry: ei,
                doc: d,
            });
        }
    }
    items.shuffle(&mut rng);
    EpochPlan { epoch, items }
}

/// One training document with the profile of the corpus it came from.
#[derive(Debug, Clone, Copy)]
pub struct StreamItem<'a> {
    pub profile: &'a DatasetProfile,
    pub doc: &'a Document,
    pub epoch: usize,
}

/// Documents of successive epoch plans, up to `budget` items.
pub struct Stream<'s, 'a> {
    spec: &'s MixSpec<'a>,
    plan: EpochPlan,
    pos: usize,
    remaining: usize,
}

pub fn stream<'s, 'a>(spec: &'s MixSpec<'a>, budget: usize) -> Stream<'s, 'a> {
    Stream {
        spec,
        plan: build_epoch(spec, 0),
        pos: 0,
        remaining: budget,
    }
}

impl<'a> Iterator for Stream<'_, 'a> {
    type Item = StreamItem<'a>;

    fn next(&mut self) -> Option<StreamItem<'a>> {
        if self.remaining == 0 || self.plan.is_empty() {
            return None;
        }
        if self.pos == self.plan.len() {
            self.plan = build_epoch(self.spec, self.plan.epoch + 1);
            self.pos = 0;
        }
        let item = &self.plan.items[self.pos];
        self.pos += 1;
        self.remaining -= 1;
        let corpus = self.spec.entries[item.entry].corpus;
        Some(StreamItem {
            profile: &corpus.profile,
            doc: &corpus.documents[item.doc],
            epoch: self.plan.epoch,
        })
    }
}

/// Dev corpora drive early stopping; augmented ones are refused.
pub fn check_dev(dev: &[Corpus]) -> Result<(), MixError> {
    match dev.iter().find(|c| c.augmented) {
        Some(c) => Err(MixError::AugmentedDev(c.profile.name.clone())),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningSpace {
    pub pseudo_singleton_n: Vec<usize>,
    pub caps: Vec<Cap>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub pseudo_singleton_n: Option<usize>,
    pub cap: Option<Cap>,
}

/// Cartesian product of the space; an empty space yields a single baseline config.
pub fn tuning_grid(space: &TuningSpace) -> Vec<RunConfig> {
    let ns: Vec<Option<usize>> = if space.pseudo_singleton_n.is_empty() {
        vec![None]
    } else {
        space.pseudo_singleton_n.iter().copied().map(Some).collect()
    };
    let caps: Vec<Option<Cap>> = if space.caps.is_empty() {
        vec![None]
    } else {
        space.caps.iter().copied().map(Some).collect()
    };
    let mut out = Vec::with_capacity(ns.len() * caps.len());
    for n in &ns {
        for cap in &caps {
            let mut parts = Vec::new();
            if let Some(n) = n {
                parts.push(format!("ps{n}"));
            }
            if let Some(c) = cap {
                parts.push(format!("cap{c}"));
            }
            let name = if parts.is_empty() { "baseline".to_string() } else { parts.join("_") };
            out.push(RunConfig {
                name,
                pseudo_singleton_n: *n,
                cap: *cap,
            });
        }
    }
    out
}

/// Recorded default pseudo-singleton count for single-corpus or joint training.
pub fn default_pseudo_singletons(joint: bool) -> usize {
    if joint {
        DEFAULT_PSEUDO_SINGLETONS_JOINT
    } else {
        DEFAULT_PSEUDO_SINGLETONS_SINGLE
    }
}

/// The run with the highest dev score; ties go to the earlier run.
pub fn select_best(results: &[(RunConfig, f64)]) -> Option<&RunConfig> {
    let mut best: Option<&(RunConfig, f64)> = None;
    for r in results {
        if best.is_none_or(|b| r.1 > b.1) {
            best = Some(r);
        }
    }
    best.map(|b| &b.0)
}

/// File form of a mix: corpus locations with caps, plus the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixConfig {
    #[serde(default)]
    pub seed: u64,
    pub corpora: Vec<CorpusRef>,
    #[serde(default)]
    pub dev: Vec<CorpusRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRef {
    pub path: String,
    /// Builtin profile name or path to a profile file.
    pub profile: String,
    #[serde(default = "default_cap")]
    pub cap: Cap,
}

fn default_cap() -> Cap {
    Cap::All
}
