//! Documents, mentions, clusters and dataset annotation policies.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Inclusive token span `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    /// Number of tokens covered. A malformed span (`end < start`) has width 0.
    pub fn width(&self) -> usize {
        if self.end < self.start {
            0
        } else {
            self.end - self.start + 1
        }
    }

    pub fn contains_token(&self, idx: usize) -> bool {
        self.start <= idx && idx <= self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// A set of coreferent mentions.
pub type Cluster = Vec<Span>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(CorpusError::UnknownSplit(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_key: String,
    pub tokens: Vec<String>,
    /// Exclusive end offset of every sentence; the last entry equals `tokens.len()`.
    pub sentence_boundaries: Vec<usize>,
    pub speakers: Option<Vec<String>>,
    pub genre: Option<String>,
    pub clusters: Vec<Cluster>,
    pub dataset_tag: String,
}

impl Document {
    /// Builds a document from sentence-split tokens.
    pub fn from_sentences(
        doc_key: impl Into<String>,
        sentences: Vec<Vec<String>>,
        dataset_tag: impl Into<String>,
    ) -> Self {
        let mut tokens = Vec::new();
        let mut sentence_boundaries = Vec::with_capacity(sentences.len());
        for sentence in sentences {
            tokens.extend(sentence);
            sentence_boundaries.push(tokens.len());
        }
        Document {
            doc_key: doc_key.into(),
            tokens,
            sentence_boundaries,
            speakers: None,
            genre: None,
            clusters: Vec::new(),
            dataset_tag: dataset_tag.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens grouped by sentence.
    pub fn sentences(&self) -> Vec<&[String]> {
        let mut out = Vec::with_capacity(self.sentence_boundaries.len());
        let mut prev = 0;
        for &end in &self.sentence_boundaries {
            let end = end.min(self.tokens.len());
            out.push(&self.tokens[prev.min(end)..end]);
            prev = end;
        }
        out
    }

    /// Every mention in every cluster, sorted by (start, end).
    pub fn mentions(&self) -> Vec<Span> {
        let mut all: Vec<Span> = self.clusters.iter().flatten().copied().collect();
        all.sort();
        all.dedup();
        all
    }

    pub fn span_tokens(&self, span: Span) -> &[String] {
        &self.tokens[span.start..=span.end]
    }

    /// Clusters with sorted members, ordered by their first member.
    pub fn canonical_clusters(&self) -> Vec<Cluster> {
        canonicalize(&self.clusters)
    }

    /// Copy with canonically ordered clusters, used for structural comparison.
    pub fn canonical(&self) -> Document {
        let mut doc = self.clone();
        doc.clusters = doc.canonical_clusters();
        doc
    }

    /// Copy with every cluster of size 1 removed.
    pub fn without_singletons(&self) -> Document {
        let mut doc = self.clone();
        doc.clusters.retain(|c| c.len() > 1);
        doc
    }
}

pub fn canonicalize(clusters: &[Cluster]) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = clusters
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.sort();
            c
        })
        .filter(|c| !c.is_empty())
        .collect();
    out.sort();
    out
}

/// Per-dataset annotation policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub name: String,
    pub annotates_singletons: bool,
    pub has_speakers: bool,
    pub has_genre: bool,
    /// Only pronoun/candidate pairs or multiple choices are annotated.
    pub partially_annotated: bool,
    #[serde(default)]
    pub markable_restriction_note: String,
}

impl DatasetProfile {
    pub fn new(name: impl Into<String>, annotates_singletons: bool) -> Self {
        DatasetProfile {
            name: name.into(),
            annotates_singletons,
            has_speakers: false,
            has_genre: false,
            partially_annotated: false,
            markable_restriction_note: String::new(),
        }
    }

    /// Headline metric used when aggregating across datasets.
    pub fn headline_metric(&self) -> HeadlineMetric {
        match self.name.as_str() {
            "gap" => HeadlineMetric::PairF1,
            "wsc" => HeadlineMetric::ChoiceAccuracy,
            _ => HeadlineMetric::ConllF1,
        }
    }

    /// Profiles for the eight benchmark datasets.
    pub fn builtin(name: &str) -> Option<DatasetProfile> {
        let p = |name: &str, singletons: bool, speakers: bool, genre: bool, partial: bool, note: &str| {
            DatasetProfile {
                name: name.to_string(),
                annotates_singletons: singletons,
                has_speakers: speakers,
                has_genre: genre,
                partially_annotated: partial,
                markable_restriction_note: note.to_string(),
            }
        };
        let profile = match name {
            "ontonotes" | "on" => p("ontonotes", false, true, true, false, "no singleton annotation"),
            "litbank" | "lb" => p("litbank", true, false, false, false, "six entity types; first ~2000 tokens"),
            "preco" | "pc" => p("preco", true, false, false, false, ""),
            "character_identification" | "ci" => {
                p("character_identification", true, true, false, false, "people only")
            }
            "wikicoref" | "wc" => p("wikicoref", false, false, false, false, "no singleton annotation"),
            "quizbowl" | "qbc" => p("quizbowl", true, false, false, false, "titles, authors, characters, answers"),
            "gap" => p("gap", false, false, false, true, "pronoun-name pairs only"),
            "wsc" => p("wsc", false, false, false, true, "multiple-choice pronoun resolution"),
            _ => return None,
        };
        Some(profile)
    }

    pub const BUILTIN_NAMES: [&'static str; 8] = [
        "ontonotes",
        "litbank",
        "preco",
        "character_identification",
        "wikicoref",
        "quizbowl",
        "gap",
        "wsc",
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadlineMetric {
    ConllF1,
    PairF1,
    ChoiceAccuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub profile: DatasetProfile,
    pub documents: Vec<Document>,
    pub split: Split,
    /// Set once pseudo-singletons have been grafted in; such corpora are training-only.
    #[serde(default)]
    pub augmented: bool,
}

impl Corpus {
    pub fn new(profile: DatasetProfile, documents: Vec<Document>, split: Split) -> Self {
        Corpus {
            profile,
            documents,
            split,
            augmented: false,
        }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn document(&self, doc_key: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_key == doc_key)
    }

    pub fn index_by_key(&self) -> HashMap<&str, usize> {
        self.documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_key.as_str(), i))
            .collect()
    }

    /// Document and corpus-level violations, keyed by doc_key.
    pub fn validate(&self) -> BTreeMap<String, Vec<Violation>> {
        let mut out = BTreeMap::new();
        for doc in &self.documents {
            let mut v = validate_document(doc, &self.profile);
            if self.augmented {
                v.retain(|v| v.kind != ViolationKind::SingletonUnderNoSingletonProfile);
            }
            if doc.dataset_tag != self.profile.name {
                v.push(Violation {
                    kind: ViolationKind::DatasetTagMismatch,
                    span: None,
                    detail: format!("tag {:?} vs profile {:?}", doc.dataset_tag, self.profile.name),
                });
            }
            if !v.is_empty() {
                out.insert(doc.doc_key.clone(), v);
            }
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("unknown split {0:?}")]
    UnknownSplit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    SpanOrdering,
    SpanOutOfRange,
    DuplicateSpanAcrossClusters,
    EmptyCluster,
    SpeakerCountMismatch,
    SingletonUnderNoSingletonProfile,
    SentenceBoundaries,
    DatasetTagMismatch,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::SpanOrdering => "span ordering",
            ViolationKind::SpanOutOfRange => "span out of range",
            ViolationKind::DuplicateSpanAcrossClusters => "duplicate span across clusters",
            ViolationKind::EmptyCluster => "empty cluster",
            ViolationKind::SpeakerCountMismatch => "speaker count mismatch",
            ViolationKind::SingletonUnderNoSingletonProfile => "singleton under no-singleton profile",
            ViolationKind::SentenceBoundaries => "sentence boundaries",
            ViolationKind::DatasetTagMismatch => "dataset tag mismatch",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub span: Option<Span>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.span {
            Some(span) => write!(f, "{} at {}: {}", self.kind, span, self.detail),
            None => write!(f, "{}: {}", self.kind, self.detail),
        }
    }
}

/// Checks every document and profile invariant. An empty result means the document is valid.
pub fn validate_document(doc: &Document, profile: &DatasetProfile) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = doc.tokens.len();

    let mut seen: HashMap<Span, usize> = HashMap::new();
    for (ci, cluster) in doc.clusters.iter().enumerate() {
        if cluster.is_empty() {
            out.push(Violation {
                kind: ViolationKind::EmptyCluster,
                span: None,
                detail: format!("cluster {ci}"),
            });
            continue;
        }
        if cluster.len() == 1 && !profile.annotates_singletons {
            out.push(Violation {
                kind: ViolationKind::SingletonUnderNoSingletonProfile,
                span: Some(cluster[0]),
                detail: format!("cluster {ci} under profile {:?}", profile.name),
            });
        }
        for &span in cluster {
            if span.end < span.start {
                out.push(Violation {
                    kind: ViolationKind::SpanOrdering,
                    span: Some(span),
                    detail: format!("cluster {ci}: end < start"),
                });
            } else if span.end >= n {
                out.push(Violation {
                    kind: ViolationKind::SpanOutOfRange,
                    span: Some(span),
                    detail: format!("cluster {ci}: document has {n} tokens"),
                });
            }
            if let Some(&other) = seen.get(&span) {
                if other != ci {
                    out.push(Violation {
                        kind: ViolationKind::DuplicateSpanAcrossClusters,
                        span: Some(span),
                        detail: format!("clusters {other} and {ci}"),
                    });
                }
            } else {
                seen.insert(span, ci);
            }
        }
    }

    if let Some(speakers) = &doc.speakers {
        if speakers.len() != n {
            out.push(Violation {
                kind: ViolationKind::SpeakerCountMismatch,
                span: None,
                detail: format!("{} speakers for {n} tokens", speakers.len()),
            });
        }
    }

    let sorted = doc.sentence_boundaries.windows(2).all(|w| w[0] < w[1]);
    let closes = doc.sentence_boundaries.last().copied().unwrap_or(0) == n;
    if !sorted || !closes || doc.sentence_boundaries.first() == Some(&0) {
        out.push(Violation {
            kind: ViolationKind::SentenceBoundaries,
            span: None,
            detail: format!("boundaries {:?} for {n} tokens", doc.sentence_boundaries),
        });
    }

    out
}

/// Summary statistics in the shape of the usual dataset table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub docs: usize,
    pub words_per_doc: f64,
    pub mentions_per_doc: f64,
    pub mean_mention_length: f64,
    pub mean_cluster_size: f64,
    /// Percentage in [0, 100].
    pub singleton_mention_pct: f64,
    /// True when the corpus has no mentions, making the ratios undefined (reported as 0).
    pub no_mentions: bool,
}

pub fn corpus_stats(corpus: &Corpus) -> Result<StatsRecord, CorpusError> {
    if corpus.documents.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let docs = corpus.documents.len();
    let mut words = 0usize;
    let mut mentions = 0usize;
    let mut mention_tokens = 0usize;
    let mut clusters = 0usize;
    let mut singletons = 0usize;
    for doc in &corpus.documents {
        words += doc.tokens.len();
        for cluster in &doc.clusters {
            clusters += 1;
            mentions += cluster.len();
            mention_tokens += cluster.iter().map(Span::width).sum::<usize>();
            if cluster.len() == 1 {
                singletons += 1;
            }
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(StatsRecord {
        docs,
        words_per_doc: ratio(words, docs),
        mentions_per_doc: ratio(mentions, docs),
        mean_mention_length: ratio(mention_tokens, mentions),
        mean_cluster_size: ratio(mentions, clusters),
        singleton_mention_pct: 100.0 * ratio(singletons, mentions),
        no_mentions: mentions == 0,
    })
}
