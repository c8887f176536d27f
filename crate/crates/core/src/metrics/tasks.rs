//! Partially annotated evaluation: pronoun-name pairs and multiple-choice pronouns.
//!
//! Task files are jsonlines. Pair records carry `doc_key, pronoun, candidates, labels`;
//! choice records carry `doc_key, pronoun, choices, gold_choice`. Spans are inclusive
//! `[start, end]` token pairs.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Cluster, Span};
use crate::formats::FormatError;

use super::{MetricsError, Prf, Tally};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairTask {
    pub doc_key: String,
    pub pronoun: Span,
    /// Candidate name spans with their gold coreference label.
    pub candidates: Vec<(Span, bool)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceTask {
    pub doc_key: String,
    pub pronoun: Span,
    pub choices: Vec<Span>,
    pub gold_choice: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct PairRecord {
    doc_key: String,
    pronoun: [usize; 2],
    candidates: Vec<[usize; 2]>,
    labels: Vec<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ChoiceRecord {
    doc_key: String,
    pronoun: [usize; 2],
    choices: Vec<[usize; 2]>,
    gold_choice: usize,
}

fn span(p: [usize; 2]) -> Span {
    Span::new(p[0], p[1])
}

impl PairTask {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.candidates.is_empty() {
            return Err(MetricsError::EmptyTask(self.doc_key.clone()));
        }
        Ok(())
    }
}

impl ChoiceTask {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.choices.is_empty() {
            return Err(MetricsError::EmptyTask(self.doc_key.clone()));
        }
        if self.gold_choice >= self.choices.len() {
            return Err(MetricsError::InvalidTask {
                doc_key: self.doc_key.clone(),
                message: format!("gold_choice {} of {} choices", self.gold_choice, self.choices.len()),
            });
        }
        Ok(())
    }
}

fn parse_records<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, FormatError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| FormatError::Json { line: i + 1, source }))
        .collect()
}

pub fn parse_pair_tasks(text: &str) -> Result<Vec<PairTask>, FormatError> {
    parse_records::<PairRecord>(text)?
        .into_iter()
        .map(|r| {
            if r.labels.len() != r.candidates.len() {
                return Err(FormatError::InvalidRecord {
                    doc_key: r.doc_key,
                    message: "labels and candidates differ in length".into(),
                });
            }
            Ok(PairTask {
                doc_key: r.doc_key,
                pronoun: span(r.pronoun),
                candidates: r.candidates.into_iter().map(span).zip(r.labels).collect(),
            })
        })
        .collect()
}

pub fn parse_choice_tasks(text: &str) -> Result<Vec<ChoiceTask>, FormatError> {
    Ok(parse_records::<ChoiceRecord>(text)?
        .into_iter()
        .map(|r| ChoiceTask {
            doc_key: r.doc_key,
            pronoun: span(r.pronoun),
            choices: r.choices.into_iter().map(span).collect(),
            gold_choice: r.gold_choice,
        })
        .collect())
}

fn read(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_pair_tasks(path: &Path) -> Result<Vec<PairTask>, FormatError> {
    parse_pair_tasks(&read(path)?)
}

pub fn read_choice_tasks(path: &Path) -> Result<Vec<ChoiceTask>, FormatError> {
    parse_choice_tasks(&read(path)?)
}

pub fn pair_tasks_to_jsonl(tasks: &[PairTask]) -> String {
    tasks
        .iter()
        .map(|t| {
            let rec = PairRecord {
                doc_key: t.doc_key.clone(),
                pronoun: [t.pronoun.start, t.pronoun.end],
                candidates: t.candidates.iter().map(|(s, _)| [s.start, s.end]).collect(),
                labels: t.candidates.iter().map(|(_, l)| *l).collect(),
            };
            serde_json::to_string(&rec).expect("record serializes") + "\n"
        })
        .collect()
}

pub fn choice_tasks_to_jsonl(tasks: &[ChoiceTask]) -> String {
    tasks
        .iter()
        .map(|t| {
            let rec = ChoiceRecord {
                doc_key: t.doc_key.clone(),
                pronoun: [t.pronoun.start, t.pronoun.end],
                choices: t.choices.iter().map(|s| [s.start, s.end]).collect(),
                gold_choice: t.gold_choice,
            };
            serde_json::to_string(&rec).expect("record serializes") + "\n"
        })
        .collect()
}

/// Index of the predicted cluster holding `span`, if any.
fn cluster_of(clusters: &[Cluster], span: Span) -> Option<usize> {
    clusters.iter().position(|c| c.contains(&span))
}

/// Micro-averaged F1 over all labeled pairs. A pair is predicted coreferent iff both
/// spans sit in the same predicted cluster.
pub fn pair_f1(tasks: &[PairTask], pred: &HashMap<String, Vec<Cluster>>) -> Result<Prf, MetricsError> {
    let mut tally = Tally::default();
    for task in tasks {
        task.validate()?;
        let clusters = pred.get(&task.doc_key).map(Vec::as_slice).unwrap_or(&[]);
        let pronoun_cluster = cluster_of(clusters, task.pronoun);
        for &(name, gold) in &task.candidates {
            let predicted = pronoun_cluster.is_some() && pronoun_cluster == cluster_of(clusters, name);
            if predicted {
                tally.p_den += 1.0;
            }
            if gold {
                tally.r_den += 1.0;
            }
            if predicted && gold {
                tally.p_num += 1.0;
                tally.r_num += 1.0;
            }
        }
    }
    Ok(Prf::from_tally(&tally))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChoiceScore {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// The predicted answer is the unique choice sharing a cluster with the pronoun; no
/// match or several matches count as incorrect.
pub fn choice_accuracy(tasks: &[ChoiceTask], pred: &HashMap<String, Vec<Cluster>>) -> Result<ChoiceScore, MetricsError> {
    let mut correct = 0;
    for task in tasks {
        task.validate()?;
        let clusters = pred.get(&task.doc_key).map(Vec::as_slice).unwrap_or(&[]);
        let Some(pc) = cluster_of(clusters, task.pronoun) else {
            continue;
        };
        let matches: Vec<usize> = task
            .choices
            .iter()
            .enumerate()
            .filter(|(_, c)| cluster_of(clusters, **c) == Some(pc))
            .map(|(i, _)| i)
            .collect();
        if matches == [task.gold_choice] {
            correct += 1;
        }
    }
    let total = tasks.len();
    Ok(ChoiceScore {
        correct,
        total,
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(a: usize) -> Span {
        Span::new(a, a)
    }

    fn preds(clusters: Vec<Cluster>) -> HashMap<String, Vec<Cluster>> {
        HashMap::from([("d".to_string(), clusters)])
    }

    fn gap_task() -> PairTask {
        PairTask {
            doc_key: "d".into(),
            pronoun: s(9),
            candidates: vec![(s(1), true), (s(4), false)],
        }
    }

    #[test]
    fn pronoun_with_true_name_only() {
        let prf = pair_f1(&[gap_task()], &preds(vec![vec![s(1), s(9)], vec![s(4)]])).unwrap();
        assert_eq!((prf.precision, prf.recall, prf.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn unclustered_pronoun_predicts_negative() {
        let prf = pair_f1(&[gap_task()], &preds(vec![vec![s(1), s(4)]])).unwrap();
        assert_eq!(prf.recall, 0.0);
        assert!(prf.degenerate);
        assert_eq!(prf.f1, 0.0);
    }

    #[test]
    fn mixed_pairs_match_definition() {
        let tasks = vec![
            gap_task(),
            PairTask {
                doc_key: "d".into(),
                pronoun: s(12),
                candidates: vec![(s(1), false), (s(4), true)],
            },
        ];
        // Both pronouns joined to name 1: task 1 TP, task 2 FP on name 1 and FN on name 4.
        let prf = pair_f1(&tasks, &preds(vec![vec![s(1), s(9), s(12)], vec![s(4)]])).unwrap();
        assert_eq!(prf.precision, 0.5);
        assert_eq!(prf.recall, 0.5);
        assert_eq!(prf.f1, 0.5);
    }

    fn wsc(gold: usize) -> ChoiceTask {
        ChoiceTask {
            doc_key: "d".into(),
            pronoun: s(7),
            choices: vec![s(0), s(3)],
            gold_choice: gold,
        }
    }

    #[test]
    fn choice_correct_and_missing() {
        let ok = choice_accuracy(&[wsc(1)], &preds(vec![vec![s(3), s(7)]])).unwrap();
        assert_eq!(ok.accuracy, 1.0);
        let none = choice_accuracy(&[wsc(1)], &preds(vec![vec![s(0), s(3)]])).unwrap();
        assert_eq!(none.accuracy, 0.0);
        let both = choice_accuracy(&[wsc(1)], &preds(vec![vec![s(0), s(3), s(7)]])).unwrap();
        assert_eq!(both.correct, 0);
    }

    #[test]
    fn bad_gold_choice_rejected() {
        assert!(choice_accuracy(&[wsc(2)], &HashMap::new()).is_err());
    }

    #[test]
    fn wsc_shaped_fixture() {
        // 273 schemas with 2 removed for plurals.
        let tasks: Vec<ChoiceTask> = (0..273)
            .filter(|i| *i != 40 && *i != 200)
            .map(|i| ChoiceTask {
                doc_key: format!("wsc_{i}"),
                ..wsc(i % 2)
            })
            .collect();
        assert_eq!(tasks.len(), 271);
        let pred: HashMap<String, Vec<Cluster>> = tasks
            .iter()
            .map(|t| (t.doc_key.clone(), vec![vec![s(0), s(7)]]))
            .collect();
        let score = choice_accuracy(&tasks, &pred).unwrap();
        assert_eq!(score.total, 271);
        assert_eq!(score.correct, tasks.iter().filter(|t| t.gold_choice == 0).count());
        let text = choice_tasks_to_jsonl(&tasks);
        assert_eq!(parse_choice_tasks(&text).unwrap(), tasks);
    }

    #[test]
    fn pair_file_round_trip() {
        let tasks = vec![gap_task()];
        assert_eq!(parse_pair_tasks(&pair_tasks_to_jsonl(&tasks)).unwrap(), tasks);
    }
}
