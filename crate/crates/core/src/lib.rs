//! Harmonizes coreference corpora with different annotation schemes, trains an
//! incremental entity-ranking coreference model at desk scale, augments training data
//! with pseudo-singletons, mixes corpora for joint training, and scores predictions.

pub mod augment;
pub mod corpus;
pub mod engine;
pub mod formats;
pub mod learning;
pub mod metrics;
pub mod mixer;
pub mod synth;

pub use corpus::{Cluster, Corpus, DatasetProfile, Document, Span, Split};
