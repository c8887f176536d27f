use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::metrics::coref::set_tally;
use crate::metrics::{score_corpus, Prf, ScoreOptions, Tally};

use super::model::{Model, Objective};
use super::optimizer::{optimizer_step, OptimizerState};
use super::{LearningError, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: usize,
    /// Mean training loss since the previous evaluation.
    pub loss: f64,
    pub dev_score: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the best dev evaluation (the final ones when there is no dev data).
    pub best: Model,
    pub best_step: usize,
    pub best_score: Option<f64>,
    pub history: Vec<EvalRecord>,
    /// Per-step training loss.
    pub losses: Vec<f64>,
    pub steps_run: usize,
    pub stopped_early: bool,
    pub optimizer: OptimizerState,
}

/// Dev score of one corpus: CoNLL F1 for the full model, mention F1 for a detector.
pub fn evaluate(model: &Model, corpus: &Corpus, objective: Objective) -> Result<f64, LearningError> {
    match objective {
        Objective::Full => {
            let preds = corpus
                .documents
                .iter()
                .map(|d| model.predict(d))
                .collect::<Result<Vec<Document>, _>>()?;
            Ok(score_corpus(corpus, &preds, ScoreOptions::default()).conll_f1)
        }
        Objective::MentionOnly => Ok(mention_f1(model, corpus).f1),
    }
}

/// Micro mention F1 of the proposal stage against gold mentions.
pub fn mention_f1(model: &Model, corpus: &Corpus) -> Prf {
    let mut tally = Tally::default();
    for d in &corpus.documents {
        let gold: HashSet<_> = d.mentions().into_iter().collect();
        let pred: HashSet<_> = model.predict_mentions(d).into_iter().collect();
        tally += set_tally(&gold, &pred);
    }
    Prf::from_tally(&tally)
}

/// Unweighted mean of per-corpus dev scores.
pub fn evaluate_macro(model: &Model, dev: &[Corpus], objective: Objective) -> Result<Option<f64>, LearningError> {
    if dev.is_empty() {
        return Ok(None);
    }
    let mut sum = 0.0;
    for c in dev {
        sum += evaluate(model, c, objective)?;
    }
    Ok(Some(sum / dev.len() as f64))
}

/// Teacher-forced training, one document per step, with periodic dev evaluation,
/// best-checkpoint tracking and early stopping after `patience` non-improving evals.
pub fn train<'a, I>(
    mut model: Model,
    stream: I,
    dev: &[Corpus],
    cfg: &TrainConfig,
    objective: Objective,
) -> Result<TrainOutcome, LearningError>
where
    I: IntoIterator<Item = &'a Document>,
{
    cfg.validate()?;
    let mut stream = stream.into_iter().take(cfg.steps).peekable();
    if stream.peek().is_none() {
        return Err(LearningError::EmptyStream);
    }

    let mut opt = OptimizerState::default();
    let mut losses = Vec::new();
    let mut history = Vec::new();
    let mut best: Option<(Model, usize, f64)> = None;
    let mut bad_evals = 0;
    let mut stopped_early = false;
    let mut window = 0.0;
    let mut window_len = 0usize;

    for (step, doc) in stream.enumerate() {
        model.params.zero_grad();
        let loss = model.document_loss(doc, objective)?;
        {
            let mut params = model.params.params_mut();
            optimizer_step(&mut params, &mut opt, step, cfg);
        }
        if !model.params.all_finite() {
            return Err(LearningError::NonFinite(step));
        }
        losses.push(loss);
        window += loss;
        window_len += 1;

        let done = step + 1;
        if done % cfg.eval_every == 0 || done == cfg.steps {
            let dev_score = evaluate_macro(&model, dev, objective)?;
            history.push(EvalRecord {
                step: done,
                loss: window / window_len as f64,
                dev_score,
            });
            window = 0.0;
            window_len = 0;
            if let Some(score) = dev_score {
                if best.as_ref().is_none_or(|(_, _, b)| score > *b) {
                    best = Some((model.clone(), done, score));
                    bad_evals = 0;
                } else {
                    bad_evals += 1;
                    if bad_evals >= cfg.patience {
                        stopped_early = true;
                        break;
                    }
                }
            }
        }
    }

    let steps_run = losses.len();
    let (best, best_step, best_score) = match best {
        Some((m, s, score)) => (m, s, Some(score)),
        None => (model, steps_run, None),
    };
    Ok(TrainOutcome {
        best,
        best_step,
        best_score,
        history,
        losses,
        steps_run,
        stopped_early,
        optimizer: opt,
    })
}

pub fn write_history(path: &Path, history: &[EvalRecord]) -> Result<(), LearningError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| LearningError::Csv(e.to_string()))?;
    for rec in history {
        w.serialize(rec).map_err(|e| LearningError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|source| LearningError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_history(path: &Path) -> Result<Vec<EvalRecord>, LearningError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| LearningError::Csv(e.to_string()))?;
    r.deserialize()
        .collect::<Result<Vec<EvalRecord>, _>>()
        .map_err(|e| LearningError::Csv(e.to_string()))
}
