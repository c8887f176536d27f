//! CoNLL-2012 column format.
//!
//! Only the columns needed for coreference are interpreted: word (4th), speaker (10th,
//! when the row has the full 12+ columns) and the final coreference column. The
//! serializer writes a normalized 12-column, tab-separated layout:
//!
//! ```text
//! #begin document (<id>); part <nnn>
//! <id> <part> <idx> <word> - - - - - <speaker> * <coref>
//! ```
//!
//! Brackets of the same cluster id are matched last-in first-out, so two spans of one
//! cluster that cross each other cannot be represented.

use std::collections::BTreeMap;

use crate::corpus::{Cluster, Corpus, DatasetProfile, Document, Span, Split};

use super::FormatError;

const NO_SPEAKER: &str = "-";

pub fn parse_conll(input: &str, profile: &DatasetProfile, split: Split) -> Result<Corpus, FormatError> {
    let mut documents = Vec::new();
    let mut current: Option<DocBuilder> = None;

    for (idx, raw) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        let err = |message: String| FormatError::Conll { line: line_no, message };

        if let Some(rest) = line.strip_prefix("#begin document") {
            if current.is_some() {
                return Err(err("nested #begin document".into()));
            }
            let (id, part) = parse_header(rest).ok_or_else(|| err(format!("malformed header {line:?}")))?;
            current = Some(DocBuilder::new(id, part));
            continue;
        }
        if line.starts_with("#end document") {
            let builder = current.take().ok_or_else(|| err("#end document without #begin".into()))?;
            documents.push(builder.finish(&profile.name).map_err(err)?);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let Some(builder) = current.as_mut() else {
            if line.trim().is_empty() {
                continue;
            }
            return Err(err("token row outside of a document".into()));
        };
        if line.trim().is_empty() {
            builder.end_sentence();
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() < 5 {
            return Err(err(format!("expected at least 5 columns, found {}", cols.len())));
        }
        let speaker = if cols.len() >= 12 { cols[9] } else { NO_SPEAKER };
        builder.push_token(cols[3], speaker, cols[cols.len() - 1]).map_err(err)?;
    }

    if let Some(builder) = current {
        return Err(FormatError::Conll {
            line: input.lines().count(),
            message: format!("document {:?} is missing #end document", builder.id),
        });
    }

    Ok(Corpus::new(profile.clone(), documents, split))
}

fn parse_header(rest: &str) -> Option<(String, u32)> {
    let rest = rest.trim();
    let open = rest.find('(')?;
    let close = rest.rfind(')')?;
    if close <= open {
        return None;
    }
    let id = rest[open + 1..close].to_string();
    let tail = rest[close + 1..].trim().trim_start_matches(';').trim();
    let part = match tail.strip_prefix("part") {
        Some(p) => p.trim().parse().ok()?,
        None if tail.is_empty() => 0,
        None => return None,
    };
    Some((id, part))
}

struct DocBuilder {
    id: String,
    part: u32,
    tokens: Vec<String>,
    speakers: Vec<String>,
    boundaries: Vec<usize>,
    open: BTreeMap<u64, Vec<usize>>,
    clusters: BTreeMap<u64, Vec<Span>>,
}

impl DocBuilder {
    fn new(id: String, part: u32) -> Self {
        DocBuilder {
            id,
            part,
            tokens: Vec::new(),
            speakers: Vec::new(),
            boundaries: Vec::new(),
            open: BTreeMap::new(),
            clusters: BTreeMap::new(),
        }
    }

    fn end_sentence(&mut self) {
        if self.boundaries.last().copied().unwrap_or(0) < self.tokens.len() {
            self.boundaries.push(self.tokens.len());
        }
    }

    fn push_token(&mut self, word: &str, speaker: &str, coref: &str) -> Result<(), String> {
        let pos = self.tokens.len();
        self.tokens.push(word.to_string());
        self.speakers.push(speaker.to_string());
        if coref == "-" {
            return Ok(());
        }
        for part in coref.split('|') {
            let opens = part.starts_with('(');
            let closes = part.ends_with(')');
            let digits = part.trim_start_matches('(').trim_end_matches(')');
            let id: u64 = digits
                .parse()
                .map_err(|_| format!("bad coreference entry {part:?} in {coref:?}"))?;
            match (opens, closes) {
                (true, true) => self.clusters.entry(id).or_default().push(Span::new(pos, pos)),
                (true, false) => self.open.entry(id).or_default().push(pos),
                (false, true) => {
                    let start = self
                        .open
                        .get_mut(&id)
                        .and_then(Vec::pop)
                        .ok_or_else(|| format!("unbalanced bracket: close of cluster {id} without open"))?;
                    self.clusters.entry(id).or_default().push(Span::new(start, pos));
                }
                (false, false) => return Err(format!("bad coreference entry {part:?} in {coref:?}")),
            }
        }
        Ok(())
    }

    fn finish(mut self, dataset_tag: &str) -> Result<Document, String> {
        if let Some((id, _)) = self.open.iter().find(|(_, v)| !v.is_empty()) {
            return Err(format!("unbalanced bracket: cluster {id} left open in {:?}", self.id));
        }
        self.end_sentence();
        let clusters: Vec<Cluster> = self
            .clusters
            .into_values()
            .map(|mut c| {
                c.sort();
                c.dedup();
                c
            })
            .collect();
        let has_speakers = self.speakers.iter().any(|s| s != NO_SPEAKER);
        let genre = self.id.split_once('/').map(|(g, _)| g.to_string());
        Ok(Document {
            doc_key: format!("{}_{}", self.id, self.part),
            tokens: self.tokens,
            sentence_boundaries: self.boundaries,
            speakers: has_speakers.then_some(self.speakers),
            genre,
            clusters,
            dataset_tag: dataset_tag.to_string(),
        })
    }
}

/// Splits `"<id>_<part>"` back into its header fields.
fn split_doc_key(doc_key: &str) -> (&str, u32) {
    match doc_key.rsplit_once('_') {
        Some((id, part)) if !id.is_empty() && !part.is_empty() && part.bytes().all(|b| b.is_ascii_digit()) => {
            match part.parse() {
                Ok(p) => (id, p),
                Err(_) => (doc_key, 0),
            }
        }
        _ => (doc_key, 0),
    }
}

pub fn serialize_conll(corpus: &Corpus) -> String {
    let mut out = String::new();
    for doc in &corpus.documents {
        serialize_document(doc, &mut out);
    }
    out
}

fn serialize_document(doc: &Document, out: &mut String) {
    let (id, part) = split_doc_key(&doc.doc_key);
    let n = doc.tokens.len();

    // Per token: (closes, singles, opens), each as (cluster id, other endpoint).
    let mut closes: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut singles: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut opens: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (cid, cluster) in doc.clusters.iter().enumerate() {
        for span in cluster {
            if span.end >= n || span.end < span.start {
                continue;
            }
            if span.start == span.end {
                singles[span.start].push(cid);
            } else {
                opens[span.start].push((cid, span.end));
                closes[span.end].push((cid, span.start));
            }
        }
    }

    out.push_str(&format!("#begin document ({id}); part {part:03}\n"));
    let mut sentence_start = 0;
    for &end in &doc.sentence_boundaries {
        let end = end.min(n);
        for t in sentence_start..end {
            let speaker = doc
                .speakers
                .as_ref()
                .and_then(|s| s.get(t))
                .map(String::as_str)
                .filter(|s| !s.is_empty())
                .unwrap_or(NO_SPEAKER);
            let coref = coref_cell(&mut closes[t], &mut singles[t], &mut opens[t]);
            out.push_str(&format!(
                "{id}\t{part}\t{}\t{}\t-\t-\t-\t-\t-\t{speaker}\t*\t{coref}\n",
                t - sentence_start,
                doc.tokens[t]
            ));
        }
        out.push('\n');
        sentence_start = end;
    }
    out.push_str("#end document\n");
}

fn coref_cell(closes: &mut [(usize, usize)], singles: &mut [usize], opens: &mut [(usize, usize)]) -> String {
    // Closes come first so a close never matches an open written in the same cell.
    closes.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    singles.sort_unstable();
    opens.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    let parts: Vec<String> = closes
        .iter()
        .map(|(c, _)| format!("{c})"))
        .chain(singles.iter().map(|c| format!("({c})")))
        .chain(opens.iter().map(|(c, _)| format!("({c}")))
        .collect();
    if parts.is_empty() {
        "-".to_string()
    } else {
        parts.join("|")
    }
}
