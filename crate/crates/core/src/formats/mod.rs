//! Corpus file formats: CoNLL-2012 coreference columns, unified jsonlines, and the
//! speaker-token text transform.

pub mod conll;
pub mod jsonl;
pub mod speaker;

use std::path::PathBuf;

use thiserror::Error;

pub use conll::{parse_conll, serialize_conll};
pub use jsonl::{read_jsonl, write_jsonl, UnifiedRecord};
pub use speaker::{inject_speaker_tokens, marker_mask, SpeakerAugmentedDocument, SPK_BEGIN, SPK_END};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Conll { line: usize, message: String },
    #[error("line {line}: malformed JSON: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("document {doc_key:?}: {message}")]
    InvalidRecord { doc_key: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
