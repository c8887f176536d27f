//! Speaker identity as text: a `[SPK] name [/SPK]` block is inserted wherever the
//! speaker changes.

use crate::corpus::{Document, Span};

pub const SPK_BEGIN: &str = "[SPK]";
pub const SPK_END: &str = "[/SPK]";

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerAugmentedDocument {
    pub doc: Document,
    /// Original token index for every token of `doc`, `None` for inserted tokens.
    pub origin_map: Vec<Option<usize>>,
}

/// Marks every token that belongs to an inserted speaker block (markers included).
pub fn marker_mask(tokens: &[String]) -> Vec<bool> {
    let mut mask = vec![false; tokens.len()];
    let mut inside = false;
    for (i, tok) in tokens.iter().enumerate() {
        if tok == SPK_BEGIN {
            inside = true;
        }
        mask[i] = inside;
        if tok == SPK_END {
            inside = false;
        }
    }
    mask
}

/// Inserts a speaker block before every token whose speaker differs from the previous
/// token's. Change points that fall strictly inside a gold mention are skipped so no
/// mention ever contains an inserted token. Documents without speakers are returned as is.
pub fn inject_speaker_tokens(doc: &Document) -> SpeakerAugmentedDocument {
    let n = doc.tokens.len();
    let Some(speakers) = doc.speakers.as_ref().filter(|s| s.len() == n) else {
        return SpeakerAugmentedDocument {
            doc: doc.clone(),
            origin_map: (0..n).map(Some).collect(),
        };
    };

    let mut interior = vec![false; n];
    for span in doc.clusters.iter().flatten() {
        for t in span.start + 1..=span.end.min(n.saturating_sub(1)) {
            interior[t] = true;
        }
    }

    let mut tokens = Vec::with_capacity(n + 8);
    let mut new_speakers = Vec::with_capacity(n + 8);
    let mut origin_map = Vec::with_capacity(n + 8);
    let mut new_index = vec![0usize; n];
    for t in 0..n {
        let changed = t == 0 || speakers[t] != speakers[t - 1];
        if changed && !interior[t] {
            let label = &speakers[t];
            let block = std::iter::once(SPK_BEGIN)
                .chain(label.split_whitespace())
                .chain(std::iter::once(SPK_END));
            for tok in block {
                tokens.push(tok.to_string());
                new_speakers.push(label.clone());
                origin_map.push(None);
            }
        }
        new_index[t] = tokens.len();
        tokens.push(doc.tokens[t].clone());
        new_speakers.push(speakers[t].clone());
        origin_map.push(Some(t));
    }

    let sentence_boundaries = doc
        .sentence_boundaries
        .iter()
        .map(|&end| if end == 0 { 0 } else { new_index[end.min(n) - 1] + 1 })
        .collect();
    let clusters = doc
        .clusters
        .iter()
        .map(|c| {
            c.iter()
                .map(|s| Span::new(new_index[s.start], new_index[s.end]))
                .collect()
        })
        .collect();

    SpeakerAugmentedDocument {
        doc: Document {
            doc_key: doc.doc_key.clone(),
            tokens,
            sentence_boundaries,
            speakers: Some(new_speakers),
            genre: doc.genre.clone(),
            clusters,
            dataset_tag: doc.dataset_tag.clone(),
        },
        origin_map,
    }
}

impl SpeakerAugmentedDocument {
    /// Maps a span of the augmented text back to original indices. Spans whose
    /// endpoints are inserted tokens have no original counterpart.
    pub fn restore_span(&self, span: Span) -> Option<Span> {
        let start = (*self.origin_map.get(span.start)?)?;
        let end = (*self.origin_map.get(span.end)?)?;
        Some(Span::new(start, end))
    }

    /// Maps a span of the original text into the augmented text.
    pub fn project_span(&self, span: Span) -> Option<Span> {
        let find = |orig: usize| self.origin_map.iter().position(|o| *o == Some(orig));
        Some(Span::new(find(span.start)?, find(span.end)?))
    }

    /// Removes inserted tokens and maps `clusters` (in augmented indexing) back.
    pub fn restore_clusters(&self, clusters: &[Vec<Span>]) -> Vec<Vec<Span>> {
        clusters
            .iter()
            .map(|c| c.iter().filter_map(|s| self.restore_span(*s)).collect::<Vec<_>>())
            .filter(|c: &Vec<Span>| !c.is_empty())
            .collect()
    }

    /// Inverse of [`inject_speaker_tokens`].
    pub fn strip(&self) -> Document {
        let d = &self.doc;
        let mut tokens = Vec::new();
        let mut speakers = Vec::new();
        for (i, origin) in self.origin_map.iter().enumerate() {
            if origin.is_some() {
                tokens.push(d.tokens[i].clone());
                if let Some(s) = &d.speakers {
                    speakers.push(s[i].clone());
                }
            }
        }
        let mut kept_before = Vec::with_capacity(self.origin_map.len() + 1);
        kept_before.push(0usize);
        for origin in &self.origin_map {
            kept_before.push(kept_before.last().unwrap() + usize::from(origin.is_some()));
        }
        let sentence_boundaries = d
            .sentence_boundaries
            .iter()
            .map(|&b| kept_before[b.min(self.origin_map.len())])
            .collect();
        Document {
            doc_key: d.doc_key.clone(),
            tokens,
            sentence_boundaries,
            speakers: d.speakers.as_ref().map(|_| speakers),
            genre: d.genre.clone(),
            clusters: self.restore_clusters(&d.clusters),
            dataset_tag: d.dataset_tag.clone(),
        }
    }
}
