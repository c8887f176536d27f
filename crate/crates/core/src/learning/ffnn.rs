//! Scalar-output feed-forward network with ReLU hidden layers and exact backprop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::param::{Param, ParamGroup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `out × in`, row-major.
    pub w: Param,
    pub b: Param,
}

impl Dense {
    fn new<R: Rng>(name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        let w = Param::uniform(format!("{name}.w"), output, input, bound, ParamGroup::Rest, rng);
        let b = Param::uniform(format!("{name}.b"), output, 1, bound, ParamGroup::Rest, rng);
        Dense { w, b }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols
    }

    /// Widens the layer by `extra` trailing inputs drawn from `rng` within `±bound`,
    /// leaving the existing weights untouched.
    pub fn append_inputs<R: Rng>(&mut self, extra: usize, bound: f64, rng: &mut R) {
        let (rows, cols) = (self.w.rows, self.w.cols);
        let mut value = Vec::with_capacity(rows * (cols + extra));
        for r in 0..rows {
            value.extend_from_slice(&self.w.value[r * cols..(r + 1) * cols]);
            value.extend((0..extra).map(|_| rng.gen_range(-bound..=bound)));
        }
        self.w.value = value;
        self.w.cols = cols + extra;
        self.w.zero_grad();
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let cols = self.w.cols;
        for r in 0..self.w.rows {
            let row = &self.w.value[r * cols..(r + 1) * cols];
            let mut acc = self.b.value[r];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            out.push(acc);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ffnn {
    pub layers: Vec<Dense>,
}

/// Activations kept for the backward pass: the input of every layer.
#[derive(Debug, Clone)]
pub struct FfnnCache {
    inputs: Vec<Vec<f64>>,
}

impl Ffnn {
    /// `dims = [input, hidden..., 1]`.
    pub fn new<R: Rng>(name: &str, dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2 && *dims.last().unwrap() == 1, "scalar output network");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::new(&format!("{name}.l{i}"), w[0], w[1], rng))
            .collect();
        Ffnn { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&cur, &mut next);
            if i < last {
                for v in &mut next {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur[0]
    }

    pub fn forward_cached(&self, x: &[f64]) -> (f64, FfnnCache) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = Vec::new();
            layer.forward_into(&cur, &mut next);
            if i < last {
                for v in &mut next {
                    *v = v.max(0.0);
                }
            }
            inputs.push(std::mem::replace(&mut cur, next));
        }
        (cur[0], FfnnCache { inputs })
    }

    /// Accumulates weight gradients for `d(loss)/d(output) = dout` and returns the
    /// gradient with respect to the network input.
    pub fn backward(&mut self, cache: &FfnnCache, dout: f64) -> Vec<f64> {
        let mut delta = vec![dout];
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            let input = &cache.inputs[i];
            let cols = layer.w.cols;
            let mut dinput = vec![0.0; cols];
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                layer.b.grad[r] += d;
                let wrow = &layer.w.value[r * cols..(r + 1) * cols];
                let grow = &mut layer.w.grad[r * cols..(r + 1) * cols];
                for j in 0..cols {
                    grow[j] += d * input[j];
                    dinput[j] += d * wrow[j];
                }
            }
            if i > 0 {
                // The input of layer i is ReLU output of layer i-1: zero where inactive.
                for (g, &a) in dinput.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            delta = dinput;
        }
        delta
    }

    pub fn params(&self) -> impl Iterator<Item = &Param> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b])
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b])
    }
}
