//! Unified jsonlines format, one document per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DatasetProfile, Document, Span, Split};

use super::FormatError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifiedRecord {
    pub doc_key: String,
    pub sentences: Vec<Vec<String>>,
    pub speakers: Option<Vec<Vec<String>>>,
    pub genre: Option<String>,
    /// Inclusive `[start, end]` pairs in flat token indexing.
    pub clusters: Vec<Vec<[usize; 2]>>,
    pub dataset_tag: String,
}

impl From<&Document> for UnifiedRecord {
    fn from(doc: &Document) -> Self {
        let sentences: Vec<Vec<String>> = doc.sentences().into_iter().map(<[String]>::to_vec).collect();
        let speakers = doc.speakers.as_ref().map(|spk| {
            let mut out = Vec::with_capacity(sentences.len());
            let mut start = 0;
            for s in &sentences {
                out.push(spk[start..start + s.len()].to_vec());
                start += s.len();
            }
            out
        });
        UnifiedRecord {
            doc_key: doc.doc_key.clone(),
            sentences,
            speakers,
            genre: doc.genre.clone(),
            clusters: doc
                .clusters
                .iter()
                .map(|c| c.iter().map(|s| [s.start, s.end]).collect())
                .collect(),
            dataset_tag: doc.dataset_tag.clone(),
        }
    }
}

impl TryFrom<UnifiedRecord> for Document {
    type Error = FormatError;

    fn try_from(rec: UnifiedRecord) -> Result<Self, Self::Error> {
        let invalid = |message: String| FormatError::InvalidRecord {
            doc_key: rec.doc_key.clone(),
            message,
        };
        let n: usize = rec.sentences.iter().map(Vec::len).sum();
        let speakers = match &rec.speakers {
            None => None,
            Some(spk) => {
                let shape_ok = spk.len() == rec.sentences.len()
                    && spk.iter().zip(&rec.sentences).all(|(a, b)| a.len() == b.len());
                if !shape_ok {
                    return Err(invalid("speakers are not parallel to sentences".into()));
                }
                Some(spk.iter().flatten().cloned().collect())
            }
        };
        let mut clusters = Vec::with_capacity(rec.clusters.len());
        for (ci, cluster) in rec.clusters.iter().enumerate() {
            let mut spans = Vec::with_capacity(cluster.len());
            for &[start, end] in cluster {
                if start > end || end >= n {
                    return Err(invalid(format!(
                        "cluster {ci}: span [{start}, {end}] out of range for {n} tokens"
                    )));
                }
                spans.push(Span::new(start, end));
            }
            clusters.push(spans);
        }
        let mut doc = Document::from_sentences(rec.doc_key.clone(), rec.sentences, rec.dataset_tag);
        doc.speakers = speakers;
        doc.genre = rec.genre;
        doc.clusters = clusters;
        Ok(doc)
    }
}

/// Parses jsonlines text. Blank lines are skipped.
pub fn parse_jsonl(text: &str, profile: &DatasetProfile, split: Split) -> Result<Corpus, FormatError> {
    parse_lines(text.lines().map(|l| Ok(l.to_string())), profile, split)
}

fn parse_lines(
    lines: impl Iterator<Item = Result<String, FormatError>>,
    profile: &DatasetProfile,
    split: Split,
) -> Result<Corpus, FormatError> {
    let mut documents = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: UnifiedRecord =
            serde_json::from_str(&line).map_err(|source| FormatError::Json { line: i + 1, source })?;
        documents.push(Document::try_from(rec)?);
    }
    Ok(Corpus::new(profile.clone(), documents, split))
}

pub fn read_jsonl(path: &Path, profile: &DatasetProfile, split: Split) -> Result<Corpus, FormatError> {
    let io_err = |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let lines = BufReader::new(file).lines().map(|l| l.map_err(io_err));
    parse_lines(lines, profile, split)
}

pub fn to_jsonl_string(corpus: &Corpus) -> String {
    let mut out = String::new();
    for doc in &corpus.documents {
        let rec = UnifiedRecord::from(doc);
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(corpus: &Corpus, path: &Path) -> Result<(), FormatError> {
    let io_err = |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    w.write_all(to_jsonl_string(corpus).as_bytes()).map_err(io_err)?;
    w.flush().map_err(io_err)
}
