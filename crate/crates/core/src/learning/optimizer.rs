//! Adam with decoupled weight decay on the encoder group and a linear decay schedule.

use serde::{Deserialize, Serialize};

use super::param::{Param, ParamGroup};
use super::TrainConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    /// Number of updates applied so far.
    pub updates: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

/// Learning rate of `base` at `step_index` under linear decay to zero at `total_steps`.
pub fn scheduled_lr(base: f64, step_index: usize, total_steps: usize) -> f64 {
    if total_steps == 0 {
        return 0.0;
    }
    base * (1.0 - step_index as f64 / total_steps as f64).max(0.0)
}

/// One update of every non-frozen parameter from its accumulated gradient.
pub fn optimizer_step(params: &mut [&mut Param], state: &mut OptimizerState, step_index: usize, cfg: &TrainConfig) {
    let lr_enc = scheduled_lr(cfg.lr_encoder, step_index, cfg.steps);
    let lr_rest = scheduled_lr(cfg.lr_rest, step_index, cfg.steps);
    if lr_enc == 0.0 && lr_rest == 0.0 {
        return;
    }
    if state.first_moment.len() != params.len() {
        state.first_moment = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        state.second_moment = state.first_moment.clone();
    }
    state.updates += 1;
    let t = state.updates as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        if p.frozen {
            continue;
        }
        let (lr, wd) = match p.group {
            ParamGroup::Encoder => (lr_enc, cfg.weight_decay),
            ParamGroup::Rest => (lr_rest, 0.0),
        };
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        for k in 0..p.value.len() {
            let g = p.grad[k];
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
            let update = (m[k] / bc1) / ((v[k] / bc2).sqrt() + cfg.eps);
            p.value[k] = p.value[k] * (1.0 - lr * wd) - lr * update;
        }
    }
}
