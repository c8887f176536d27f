use rand::Rng;
use serde::{Deserialize, Serialize};

/// Optimizer group: the token encoder (weight-decayed, its own learning rate) or
/// everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamGroup {
    Encoder,
    Rest,
}

/// A dense row-major matrix of weights with its gradient buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<f64>,
    #[serde(skip)]
    pub grad: Vec<f64>,
    pub group: ParamGroup,
    #[serde(default)]
    pub frozen: bool,
}

impl Param {
    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize, group: ParamGroup) -> Self {
        Param {
            name: name.into(),
            rows,
            cols,
            value: vec![0.0; rows * cols],
            grad: vec![0.0; rows * cols],
            group,
            frozen: false,
        }
    }

    pub fn uniform<R: Rng>(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        bound: f64,
        group: ParamGroup,
        rng: &mut R,
    ) -> Self {
        let mut p = Param::zeros(name, rows, cols, group);
        for v in &mut p.value {
            *v = rng.gen_range(-bound..=bound);
        }
        p
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.value[r * self.cols..(r + 1) * self.cols]
    }

    pub fn add_to_row_grad(&mut self, r: usize, g: &[f64]) {
        let row = &mut self.grad[r * self.cols..(r + 1) * self.cols];
        for (a, b) in row.iter_mut().zip(g) {
            *a += b;
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.clear();
        self.grad.resize(self.value.len(), 0.0);
    }

    pub fn is_finite(&self) -> bool {
        self.value.iter().all(|v| v.is_finite())
    }
}
