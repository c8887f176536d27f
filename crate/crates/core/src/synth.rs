//! Synthetic name-coreference corpora: capitalized name tokens embedded in lowercase
//! filler text, where identical names corefer. The generator is its own oracle.

use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DatasetProfile, Document, Span, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub docs: usize,
    pub seed: u64,
    pub names: usize,
    pub fillers: usize,
    /// Inclusive ranges.
    pub sentences: (usize, usize),
    pub sentence_len: (usize, usize),
    pub entities: (usize, usize),
    pub mentions_per_entity: (usize, usize),
    /// Names mentioned exactly once per document.
    pub singletons: (usize, usize),
    pub annotate_singletons: bool,
    pub dataset_tag: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            docs: 200,
            seed: 0,
            names: 80,
            fillers: 200,
            sentences: (5, 7),
            sentence_len: (7, 10),
            entities: (2, 4),
            mentions_per_entity: (2, 4),
            singletons: (2, 5),
            annotate_singletons: true,
            dataset_tag: "synthetic".into(),
        }
    }
}

/// Fixed lexicon shared by every corpus: `(names, fillers)`, all distinct.
pub fn lexicon(names: usize, fillers: usize) -> (Vec<String>, Vec<String>) {
    const ONSETS: [&str; 14] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
    const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let mut seen = BTreeSet::new();
    let mut word = |rng: &mut ChaCha8Rng, syllables: usize| loop {
        let w: String = (0..syllables)
            .map(|_| format!("{}{}", ONSETS.choose(rng).unwrap(), VOWELS.choose(rng).unwrap()))
            .collect();
        if seen.insert(w.clone()) {
            return w;
        }
    };
    let name_list = (0..names)
        .map(|_| {
            let w = word(&mut rng, 3);
            let mut c = w.chars();
            let first = c.next().unwrap().to_ascii_uppercase();
            std::iter::once(first).chain(c).collect()
        })
        .collect();
    let filler_list = (0..fillers).map(|_| word(&mut rng, 2)).collect();
    (name_list, filler_list)
}

pub fn profile(annotate_singletons: bool) -> DatasetProfile {
    let name = if annotate_singletons { "synthetic" } else { "synthetic_nosingleton" };
    DatasetProfile::new(name, annotate_singletons)
}

fn between<R: Rng>(rng: &mut R, (lo, hi): (usize, usize)) -> usize {
    rng.gen_range(lo..=hi.max(lo))
}

/// One corpus of `cfg.docs` documents. Mention count per document never exceeds
/// `floor(0.4 · |D|)`, so every gold mention can survive top-K proposal.
pub fn generate(cfg: &SynthConfig, split: Split) -> Corpus {
    let (names, fillers) = lexicon(cfg.names, cfg.fillers);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut documents = Vec::with_capacity(cfg.docs);
    for i in 0..cfg.docs {
        let lens: Vec<usize> = (0..between(&mut rng, cfg.sentences))
            .map(|_| between(&mut rng, cfg.sentence_len).max(1))
            .collect();
        let n: usize = lens.iter().sum();
        let budget = (2 * n) / 5;

        let mut counts: Vec<usize> = (0..between(&mut rng, cfg.entities))
            .map(|_| between(&mut rng, cfg.mentions_per_entity).max(2))
            .collect();
        let mut singles = between(&mut rng, cfg.singletons);
        while counts.iter().sum::<usize>() + singles > budget {
            if singles > 0 {
                singles -= 1;
            } else if let Some(c) = counts.last_mut() {
                *c -= 1;
                if *c < 2 {
                    counts.pop();
                }
            } else {
                break;
            }
        }
        let groups = counts.len() + singles;
        let chosen: Vec<&String> = index::sample(&mut rng, names.len(), groups.min(names.len()))
            .into_iter()
            .map(|k| &names[k])
            .collect();

        let total: usize = counts.iter().sum::<usize>() + singles;
        let mut positions = index::sample(&mut rng, n, total).into_vec();
        positions.shuffle(&mut rng);

        let mut tokens: Vec<String> = (0..n).map(|_| fillers.choose(&mut rng).unwrap().clone()).collect();
        let mut clusters = Vec::new();
        let mut cursor = 0;
        for (g, name) in chosen.iter().enumerate() {
            let size = counts.get(g).copied().unwrap_or(1);
            let mut spans: Vec<Span> = positions[cursor..cursor + size].iter().map(|&p| Span::new(p, p)).collect();
            cursor += size;
            for s in &spans {
                tokens[s.start] = (*name).clone();
            }
            spans.sort();
            if size > 1 || cfg.annotate_singletons {
                clusters.push(spans);
            }
        }
        clusters.sort();

        let mut sentences = Vec::with_capacity(lens.len());
        let mut start = 0;
        for len in lens {
            sentences.push(tokens[start..start + len].to_vec());
            start += len;
        }
        let mut doc = Document::from_sentences(format!("{}_{:04}", cfg.dataset_tag, i), sentences, cfg.dataset_tag.clone());
        doc.clusters = clusters;
        documents.push(doc);
    }
    let mut profile = profile(cfg.annotate_singletons);
    profile.name = cfg.dataset_tag.clone();
    Corpus::new(profile, documents, split)
}

/// The bundled benchmark: 200 training and 50 dev documents from disjoint seeds.
pub fn benchmark(annotate_train_singletons: bool, annotate_dev_singletons: bool) -> (Corpus, Corpus) {
    let train = generate(
        &SynthConfig {
            docs: 200,
            seed: 11,
            annotate_singletons: annotate_train_singletons,
            ..Default::default()
        },
        Split::Train,
    );
    let dev = generate(
        &SynthConfig {
            docs: 50,
            seed: 12,
            annotate_singletons: annotate_dev_singletons,
            ..Default::default()
        },
        Split::Dev,
    );
    (train, dev)
}
