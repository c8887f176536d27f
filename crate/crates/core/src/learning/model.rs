//! The trainable model: token encoder, span representations, the mention scorer `s_m`,
//! the pair scorer `f_c` with its feature tables, and the exact gradient of the
//! teacher-forced loss.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, Span};
use crate::engine::features::{count_bucket, COUNT_BUCKETS, DISTANCE_BUCKETS};
use crate::engine::{
    self, cluster_document, enumerate_candidates, pair_input, prune_for_inference, select_top_k, top_k_count,
    CandidateSpan, ClusteringConfig, Decision, EntityScorer, EntityState, PairFeatures, SpanScorer,
};
use crate::formats::speaker::{inject_speaker_tokens, SpeakerAugmentedDocument, SPK_BEGIN, SPK_END};

use super::ffnn::Ffnn;
use super::loss::{cluster_loss, mention_loss};
use super::param::{Param, ParamGroup};
use super::LearningError;

/// Term-frequency buckets of a token within its document: 1, 2, 3, 4+.
pub const TF_BUCKETS: usize = 4;
/// Span-width buckets share the mention-count bucketing {1,2,3,4,5–7,8–15,16+}.
pub const WIDTH_BUCKETS: usize = COUNT_BUCKETS;

pub const UNK: &str = "<unk>";

/// String → index map; index 0 is reserved for unknown strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Builds a vocabulary from distinct strings, sorted, after the unknown entry.
    pub fn build<I, S>(items: I) -> Vocab
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = items.into_iter().map(Into::into).filter(|s| s != UNK).collect();
        Vocab::from(std::iter::once(UNK.to_string()).chain(set).collect::<Vec<_>>())
    }

    /// Token vocabulary of `corpora` as the model sees them (speaker blocks included).
    pub fn from_corpora(corpora: &[&Corpus], use_speakers: bool) -> Vocab {
        let mut toks: Vec<String> = vec![SPK_BEGIN.into(), SPK_END.into()];
        for c in corpora {
            for d in &c.documents {
                if use_speakers {
                    toks.extend(inject_speaker_tokens(d).doc.tokens);
                } else {
                    toks.extend(d.tokens.iter().cloned());
                }
            }
        }
        Vocab::build(toks)
    }

    pub fn genres_of(corpora: &[&Corpus]) -> Vocab {
        Vocab::build(corpora.iter().flat_map(|c| c.documents.iter().filter_map(|d| d.genre.clone())))
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub embed_dim: usize,
    /// Width of the term-frequency embedding appended to each token (0 disables it).
    pub tf_dim: usize,
    pub width_dim: usize,
    pub feature_dim: usize,
    pub hidden: usize,
    pub use_speakers: bool,
    pub use_genre: bool,
    /// Zero-initialize and freeze the genre table.
    pub freeze_genre: bool,
    pub clustering: ClusteringConfig,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 16,
            tf_dim: 4,
            width_dim: 8,
            feature_dim: 8,
            hidden: 64,
            use_speakers: true,
            use_genre: false,
            freeze_genre: false,
            clustering: ClusteringConfig::default(),
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), LearningError> {
        self.clustering.validate()?;
        if self.embed_dim == 0 || self.hidden == 0 || self.feature_dim == 0 {
            return Err(LearningError::InvalidConfig("embed_dim, hidden and feature_dim must be positive".into()));
        }
        if self.clustering.max_mention_len == 0 {
            return Err(LearningError::InvalidConfig("max_mention_len must be positive".into()));
        }
        Ok(())
    }

    pub fn token_dim(&self) -> usize {
        self.embed_dim + self.tf_dim
    }

    pub fn span_dim(&self) -> usize {
        3 * self.token_dim() + self.width_dim
    }

    pub fn pair_feature_dim(&self) -> usize {
        self.feature_dim * if self.use_genre { 3 } else { 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterStore {
    pub embeddings: Param,
    pub tf_embeddings: Param,
    pub width_embeddings: Param,
    pub mention_scorer: Ffnn,
    pub cluster_scorer: Ffnn,
    pub count_embeddings: Param,
    pub distance_embeddings: Param,
    pub genre_embeddings: Option<Param>,
}

impl ParameterStore {
    pub fn params(&self) -> Vec<&Param> {
        let mut v = vec![&self.embeddings, &self.tf_embeddings, &self.width_embeddings];
        v.extend(self.mention_scorer.params());
        v.extend(self.cluster_scorer.params());
        v.push(&self.count_embeddings);
        v.push(&self.distance_embeddings);
        v.extend(self.genre_embeddings.as_ref());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = vec![&mut self.embeddings, &mut self.tf_embeddings, &mut self.width_embeddings];
        v.extend(self.mention_scorer.params_mut());
        v.extend(self.cluster_scorer.params_mut());
        v.push(&mut self.count_embeddings);
        v.push(&mut self.distance_embeddings);
        v.extend(self.genre_embeddings.as_mut());
        v
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite() && p.grad.iter().all(|g| g.is_finite()))
    }
}

/// What the loss covers: the full model, or only the proposal stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Full,
    MentionOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub genres: Vocab,
    pub params: ParameterStore,
}

/// A document turned into token vectors.
#[derive(Debug, Clone)]
pub struct EncodedDoc {
    ids: Vec<usize>,
    tf: Vec<usize>,
    vecs: Vec<f64>,
    genre: usize,
}

fn tf_bucket(count: usize) -> usize {
    count.clamp(1, TF_BUCKETS) - 1
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (a, b) in dst.iter_mut().zip(src) {
        *a += b;
    }
}

impl Model {
    pub fn new(config: ModelConfig, vocab: Vocab, genres: Vocab) -> Result<Model, LearningError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bound = |n: usize| 1.0 / (n.max(1) as f64).sqrt();
        let (d, f) = (config.embed_dim, config.feature_dim);
        let r = config.span_dim();
        let h = config.hidden;

        let embeddings = Param::uniform("embeddings", vocab.len(), d, bound(d), ParamGroup::Encoder, &mut rng);
        let tf_embeddings =
            Param::uniform("tf_embeddings", TF_BUCKETS, config.tf_dim, bound(config.tf_dim), ParamGroup::Encoder, &mut rng);
        let width_embeddings =
            Param::uniform("width_embeddings", WIDTH_BUCKETS, config.width_dim, bound(config.width_dim), ParamGroup::Rest, &mut rng);
        let mention_scorer = Ffnn::new("mention_scorer", &[r, h, h, 1], &mut rng);
        let base_in = 3 * r + 2 * f;
        let mut cluster_scorer = Ffnn::new("cluster_scorer", &[base_in, h, h, 1], &mut rng);
        let count_embeddings = Param::uniform("count_embeddings", COUNT_BUCKETS, f, bound(f), ParamGroup::Rest, &mut rng);
        let distance_embeddings =
            Param::uniform("distance_embeddings", DISTANCE_BUCKETS, f, bound(f), ParamGroup::Rest, &mut rng);

        // Genre parameters come from their own stream so toggling them leaves every
        // other initial value unchanged.
        let genre_embeddings = if config.use_genre {
            let mut grng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6765_6e72_6500_0000);
            cluster_scorer.layers[0].append_inputs(f, bound(base_in), &mut grng);
            let mut table = Param::zeros("genre_embeddings", genres.len(), f, ParamGroup::Rest);
            if config.freeze_genre {
                table.frozen = true;
            } else {
                table = Param::uniform("genre_embeddings", genres.len(), f, bound(f), ParamGroup::Rest, &mut grng);
            }
            Some(table)
        } else {
            None
        };

        Ok(Model {
            config,
            vocab,
            genres,
            params: ParameterStore {
                embeddings,
                tf_embeddings,
                width_embeddings,
                mention_scorer,
                cluster_scorer,
                count_embeddings,
                distance_embeddings,
                genre_embeddings,
            },
        })
    }

    /// Builds vocabularies from `corpora` and initializes a fresh model.
    pub fn for_corpora(config: ModelConfig, corpora: &[&Corpus]) -> Result<Model, LearningError> {
        let vocab = Vocab::from_corpora(corpora, config.use_speakers);
        let genres = Vocab::genres_of(corpora);
        Model::new(config, vocab, genres)
    }

    /// The text the model reads: speaker blocks inserted when enabled.
    pub fn prepare(&self, doc: &Document) -> SpeakerAugmentedDocument {
        if self.config.use_speakers && doc.speakers.is_some() {
            inject_speaker_tokens(doc)
        } else {
            SpeakerAugmentedDocument {
                doc: doc.clone(),
                origin_map: (0..doc.tokens.len()).map(Some).collect(),
            }
        }
    }

    pub fn encode(&self, doc: &Document) -> EncodedDoc {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in &doc.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
        let ids: Vec<usize> = doc.tokens.iter().map(|t| self.vocab.id(t)).collect();
        let tf: Vec<usize> = doc.tokens.iter().map(|t| tf_bucket(counts[t.as_str()])).collect();
        let dim = self.config.token_dim();
        let mut vecs = Vec::with_capacity(ids.len() * dim);
        for (&id, &b) in ids.iter().zip(&tf) {
            vecs.extend_from_slice(self.params.embeddings.row(id));
            vecs.extend_from_slice(self.params.tf_embeddings.row(b));
        }
        let genre = doc.genre.as_deref().map_or(0, |g| self.genres.id(g));
        EncodedDoc { ids, tf, vecs, genre }
    }

    fn token_vec<'e>(&self, enc: &'e EncodedDoc, t: usize) -> &'e [f64] {
        let dim = self.config.token_dim();
        &enc.vecs[t * dim..(t + 1) * dim]
    }

    /// `[start token; end token; mean of interior tokens; width embedding]`.
    pub fn span_representation(&self, enc: &EncodedDoc, span: Span) -> Vec<f64> {
        let dim = self.config.token_dim();
        let mut v = Vec::with_capacity(self.config.span_dim());
        v.extend_from_slice(self.token_vec(enc, span.start));
        v.extend_from_slice(self.token_vec(enc, span.end));
        let mut mid = vec![0.0; dim];
        let w = span.width();
        if w >= 3 {
            for t in span.start + 1..span.end {
                add_into(&mut mid, self.token_vec(enc, t));
            }
            let inv = (w - 2) as f64;
            for m in &mut mid {
                *m /= inv;
            }
        }
        v.extend_from_slice(&mid);
        v.extend_from_slice(self.params.width_embeddings.row(count_bucket(w)));
        v
    }

    /// `g(x, e) = [count embedding; distance embedding; genre embedding?]`.
    pub fn pair_features(&self, f: &PairFeatures, genre: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.config.pair_feature_dim());
        v.extend_from_slice(self.params.count_embeddings.row(f.count_bucket()));
        v.extend_from_slice(self.params.distance_embeddings.row(f.distance_bucket()));
        if let Some(g) = &self.params.genre_embeddings {
            v.extend_from_slice(g.row(genre));
        }
        v
    }

    /// Scorer view of one encoded document, usable by the engine.
    pub fn bind<'a>(&'a self, doc: &Document) -> BoundModel<'a> {
        BoundModel {
            model: self,
            enc: self.encode(doc),
        }
    }

    pub fn predict(&self, doc: &Document) -> Result<Document, LearningError> {
        self.predict_with(doc, &self.config.clustering)
    }

    /// Predicted clusters in the document's own token indexing.
    pub fn predict_with(&self, doc: &Document, cfg: &ClusteringConfig) -> Result<Document, LearningError> {
        let mut input = doc.clone();
        if !cfg.gold_mention_mode {
            input.clusters.clear();
        }
        let prepared = self.prepare(&input);
        let bound = self.bind(&prepared.doc);
        let infer = ClusteringConfig {
            teacher_forcing: false,
            ..*cfg
        };
        let out = engine::predict(&prepared.doc, &bound, &bound, &infer)?;
        let mut res = doc.clone();
        res.clusters = prepared.restore_clusters(&out.clusters);
        Ok(res)
    }

    /// Mentions kept by the proposal stage at inference (top-K, score ≥ 0).
    pub fn predict_mentions(&self, doc: &Document) -> Vec<Span> {
        let mut input = doc.clone();
        input.clusters.clear();
        let prepared = self.prepare(&input);
        let bound = self.bind(&prepared.doc);
        let cfg = self.config.clustering;
        let kept = prune_for_inference(engine::propose_mentions(&prepared.doc, &bound, &cfg));
        kept.iter().filter_map(|c| prepared.restore_span(c.span)).collect()
    }

    /// `s_m` for every enumerable span, in the document's own indexing and (start, end) order.
    pub fn score_all_spans(&self, doc: &Document) -> Vec<(Span, f64)> {
        let mut input = doc.clone();
        input.clusters.clear();
        let prepared = self.prepare(&input);
        let bound = self.bind(&prepared.doc);
        let spans = enumerate_candidates(&prepared.doc, &self.config.clustering);
        bound
            .score_spans(&prepared.doc, &spans)
            .into_iter()
            .filter_map(|c| prepared.restore_span(c.span).map(|s| (s, c.mention_score)))
            .collect()
    }

    /// Loss on one training document; gradients are added to the parameter buffers.
    pub fn document_loss(&mut self, doc: &Document, objective: Objective) -> Result<f64, LearningError> {
        let cfg = self.config.clustering;
        let prepared = self.prepare(doc);
        let pdoc = &prepared.doc;
        let enc = self.encode(pdoc);
        let gold_set: HashSet<Span> = pdoc.clusters.iter().flatten().copied().collect();

        let spans = enumerate_candidates(pdoc, &cfg);
        let reps: Vec<Vec<f64>> = spans.iter().map(|&s| self.span_representation(&enc, s)).collect();
        let cands: Vec<CandidateSpan> = spans
            .iter()
            .zip(&reps)
            .map(|(&span, r)| CandidateSpan {
                span,
                representation: r.clone(),
                mention_score: self.params.mention_scorer.forward(r),
            })
            .collect();
        let top = select_top_k(&cands, top_k_count(pdoc.tokens.len(), cfg.top_k_ratio));
        let top_cands: Vec<CandidateSpan> = top.iter().map(|&i| cands[i].clone()).collect();

        let (mut loss, dm) = mention_loss(&top_cands, &gold_set);
        let mut rep_grad: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let rdim = self.config.span_dim();
        for (j, &i) in top.iter().enumerate() {
            let (_, cache) = self.params.mention_scorer.forward_cached(&reps[i]);
            let g = self.params.mention_scorer.backward(&cache, dm[j]);
            add_into(rep_grad.entry(i).or_insert_with(|| vec![0.0; rdim]), &g);
        }

        if objective == Objective::Full {
            let clustered: Vec<usize> = top.iter().copied().filter(|&i| gold_set.contains(&spans[i])).collect();
            let inputs: Vec<CandidateSpan> = clustered.iter().map(|&i| cands[i].clone()).collect();
            let forced = ClusteringConfig {
                teacher_forcing: true,
                ..cfg
            };
            let trace = {
                let bound = BoundModel { model: &*self, enc: enc.clone() };
                cluster_document(&inputs, &bound, &forced, Some(&pdoc.clusters))?.trace
            };
            let (lc, dc) = cluster_loss(&trace)?;
            loss += lc;
            self.backprop_clustering(&trace, &dc, &clustered, &spans, &reps, enc.genre, &mut rep_grad);
        }

        self.backprop_spans(&enc, &spans, &rep_grad);
        Ok(loss)
    }

    /// Replays the teacher-forced decisions, pushing `∂L/∂s_c` through `f_c`, the
    /// feature tables, and the entity means back to span representations.
    #[allow(clippy::too_many_arguments)]
    fn backprop_clustering(
        &mut self,
        trace: &[engine::TraceStep],
        dc: &[Vec<f64>],
        clustered: &[usize],
        spans: &[Span],
        reps: &[Vec<f64>],
        genre: usize,
        rep_grad: &mut BTreeMap<usize, Vec<f64>>,
    ) {
        let r = self.config.span_dim();
        let f = self.config.feature_dim;
        let mut entities: Vec<(EntityState, Vec<usize>)> = Vec::new();
        for (t, step) in trace.iter().enumerate() {
            let xi = clustered[t];
            let x = &reps[xi];
            for (j, &d) in dc[t].iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let (state, members) = &entities[j];
                let feats = PairFeatures::between(spans[xi], state);
                let g = self.pair_features(&feats, genre);
                let input = pair_input(x, &state.representation, &g);
                let (s, cache) = self.params.cluster_scorer.forward_cached(&input);
                debug_assert_eq!(s.to_bits(), step.scores[j].to_bits());
                let din = self.params.cluster_scorer.backward(&cache, d);

                let e = &state.representation;
                let dx: Vec<f64> = (0..r).map(|k| din[k] + din[2 * r + k] * e[k]).collect();
                let share = 1.0 / members.len() as f64;
                let de: Vec<f64> = (0..r).map(|k| (din[r + k] + din[2 * r + k] * x[k]) * share).collect();
                add_into(rep_grad.entry(xi).or_insert_with(|| vec![0.0; r]), &dx);
                for &m in members {
                    add_into(rep_grad.entry(m).or_insert_with(|| vec![0.0; r]), &de);
                }
                let fg = &din[3 * r..];
                self.params.count_embeddings.add_to_row_grad(feats.count_bucket(), &fg[..f]);
                self.params.distance_embeddings.add_to_row_grad(feats.distance_bucket(), &fg[f..2 * f]);
                if let Some(table) = &mut self.params.genre_embeddings {
                    table.add_to_row_grad(genre, &fg[2 * f..3 * f]);
                }
            }
            match step.gold_decision.expect("teacher-forced trace") {
                Decision::Attach(j) => {
                    entities[j].0.absorb(spans[xi], x);
                    entities[j].1.push(xi);
                }
                Decision::New => entities.push((EntityState::new(spans[xi], x.clone()), vec![xi])),
            }
        }
    }

    fn backprop_spans(&mut self, enc: &EncodedDoc, spans: &[Span], rep_grad: &BTreeMap<usize, Vec<f64>>) {
        let dim = self.config.token_dim();
        let d = self.config.embed_dim;
        let has_tf = self.config.tf_dim > 0;
        let p = &mut self.params;
        let mut token = |t: usize, g: &[f64]| {
            p.embeddings.add_to_row_grad(enc.ids[t], &g[..d]);
            if has_tf {
                p.tf_embeddings.add_to_row_grad(enc.tf[t], &g[d..]);
            }
        };
        for (&i, g) in rep_grad {
            let span = spans[i];
            token(span.start, &g[..dim]);
            token(span.end, &g[dim..2 * dim]);
            let w = span.width();
            if w >= 3 {
                let inv = (w - 2) as f64;
                let mid: Vec<f64> = g[2 * dim..3 * dim].iter().map(|v| v / inv).collect();
                for t in span.start + 1..span.end {
                    token(t, &mid);
                }
            }
        }
        for (&i, g) in rep_grad {
            p.width_embeddings.add_to_row_grad(count_bucket(spans[i].width()), &g[3 * dim..]);
        }
    }
}

/// A model bound to one encoded document; implements both engine scorer traits.
pub struct BoundModel<'a> {
    model: &'a Model,
    enc: EncodedDoc,
}

impl SpanScorer for BoundModel<'_> {
    fn score_spans(&self, _doc: &Document, spans: &[Span]) -> Vec<CandidateSpan> {
        spans
            .iter()
            .map(|&span| {
                let representation = self.model.span_representation(&self.enc, span);
                CandidateSpan {
                    span,
                    mention_score: self.model.params.mention_scorer.forward(&representation),
                    representation,
                }
            })
            .collect()
    }
}

impl EntityScorer for BoundModel<'_> {
    fn feature_embedding(&self, features: &PairFeatures) -> Vec<f64> {
        self.model.pair_features(features, self.enc.genre)
    }

    fn score_pair(&self, input: &[f64]) -> f64 {
        self.model.params.cluster_scorer.forward(input)
    }
}
