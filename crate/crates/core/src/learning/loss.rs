use std::collections::HashSet;

use crate::corpus::Span;
use crate::engine::{CandidateSpan, Decision, TraceStep};

use super::LearningError;

/// `ln(1 + e^s)` without overflow.
fn softplus(s: f64) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p()
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Logistic loss on raw scores: `Σ softplus(s) − y·s`. Returns the loss and `∂L/∂s`.
pub fn logistic_loss(scores: &[f64], labels: &[bool]) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(scores.len());
    for (&s, &y) in scores.iter().zip(labels) {
        let y = if y { 1.0 } else { 0.0 };
        loss += softplus(s) - y * s;
        grad.push(sigmoid(s) - y);
    }
    (loss, grad)
}

/// Binary logistic loss over the top-K set, label = membership in `gold`.
pub fn mention_loss(cands: &[CandidateSpan], gold: &HashSet<Span>) -> (f64, Vec<f64>) {
    let scores: Vec<f64> = cands.iter().map(|c| c.mention_score).collect();
    let labels: Vec<bool> = cands.iter().map(|c| gold.contains(&c.span)).collect();
    logistic_loss(&scores, &labels)
}

/// Softmax cross-entropy over `[s_c(x, e_1), …, s_c(x, e_M), 0]` per step, gold action
/// from the trace. Returns the loss and `∂L/∂s_c` for every traced score.
pub fn cluster_loss(trace: &[TraceStep]) -> Result<(f64, Vec<Vec<f64>>), LearningError> {
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(trace.len());
    for step in trace {
        let gold = step.gold_decision.ok_or(LearningError::MissingGoldAction(step.step))?;
        let m = step.scores.len();
        let target = match gold {
            Decision::Attach(j) if j < m => j,
            Decision::Attach(_) => return Err(LearningError::MissingGoldAction(step.step)),
            Decision::New => m,
        };
        let logit = |k: usize| if k < m { step.scores[k] } else { 0.0 };
        let max = (0..=m).map(logit).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = (0..=m).map(|k| (logit(k) - max).exp()).sum();
        loss += max + z.ln() - logit(target);
        grads.push(
            (0..m)
                .map(|k| (logit(k) - max).exp() / z - if k == target { 1.0 } else { 0.0 })
                .collect(),
        );
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn step(scores: Vec<f64>, gold: Decision) -> TraceStep {
        TraceStep {
            step: 0,
            span: Span::new(0, 0),
            scores,
            decision: gold,
            gold_decision: Some(gold),
        }
    }

    #[test]
    fn logistic_analytic_values() {
        assert!((logistic_loss(&[0.0], &[true]).0 - LN2).abs() < 1e-15);
        assert!((logistic_loss(&[0.0], &[false]).0 - LN2).abs() < 1e-15);
        let (l, g) = logistic_loss(&[800.0, 900.0], &[true, true]);
        assert!(l < 1e-300 && g.iter().all(|v| v.abs() < 1e-300));
        let (l, _) = logistic_loss(&[-800.0], &[true]);
        assert!((l - 800.0).abs() < 1e-9);
    }

    #[test]
    fn cluster_loss_analytic_values() {
        let (l, g) = cluster_loss(&[step(vec![], Decision::New)]).unwrap();
        assert_eq!(l, 0.0);
        assert!(g[0].is_empty());
        let (l, g) = cluster_loss(&[step(vec![0.0], Decision::Attach(0))]).unwrap();
        assert!((l - LN2).abs() < 1e-15);
        assert!((g[0][0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn cluster_loss_needs_gold() {
        let mut s = step(vec![1.0], Decision::New);
        s.gold_decision = None;
        assert!(cluster_loss(&[s]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = 1e-5;
        for _ in 0..100 {
            let n = rng.gen_range(1..6);
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let y: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let (_, g) = logistic_loss(&s, &y);
            let gold = if rng.gen_bool(0.3) { Decision::New } else { Decision::Attach(rng.gen_range(0..n)) };
            let (_, gc) = cluster_loss(&[step(s.clone(), gold)]).unwrap();
            for k in 0..n {
                let mut p = s.clone();
                p[k] += h;
                let mut m = s.clone();
                m[k] -= h;
                let num = (logistic_loss(&p, &y).0 - logistic_loss(&m, &y).0) / (2.0 * h);
                assert!((num - g[k]).abs() <= 1e-4 * num.abs().max(g[k].abs()).max(1e-8));
                let cp = cluster_loss(&[step(p, gold)]).unwrap().0;
                let cm = cluster_loss(&[step(m, gold)]).unwrap().0;
                let num = (cp - cm) / (2.0 * h);
                assert!((num - gc[0][k]).abs() <= 1e-4 * num.abs().max(gc[0][k].abs()).max(1e-8));
            }
        }
    }
}
