//! One-hidden-layer tanh regression network with an analytic Jacobian, the
//! building block of the teacher's stages.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `y = w2 · tanh(W1 x + b1) + b2`.
///
/// Flat parameter layout: `[W1 row-major (hidden × inputs), b1, w2, b2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TanhMlp {
    pub inputs: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl TanhMlp {
    /// Uniform `±1/√inputs` first-layer weights and `±1` biases. The output
    /// layer starts at `out_scale`-sized random weights and bias `b2`.
    pub fn init(inputs: usize, hidden: usize, out_scale: f64, b2: f64, seed: u64) -> Result<Self> {
        if inputs == 0 || hidden == 0 {
            return Err(Error::Config("MLP needs at least one input and one hidden unit".into()));
        }
        let mut rng = crate::seed::rng(seed);
        let s = 1.0 / (inputs as f64).sqrt();
        let w1 = (0..inputs * hidden).map(|_| rng.random_range(-s..s)).collect();
        let b1 = (0..hidden).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w2 = (0..hidden)
            .map(|_| if out_scale > 0.0 { rng.random_range(-out_scale..out_scale) } else { 0.0 })
            .collect();
        Ok(TanhMlp {
            inputs,
            hidden,
            w1,
            b1,
            w2,
            b2,
        })
    }

    pub fn n_params(&self) -> usize {
        self.hidden * (self.inputs + 2) + 1
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (d, h) = (self.inputs, self.hidden);
        self.w1.copy_from_slice(&p[..h * d]);
        self.b1.copy_from_slice(&p[h * d..h * d + h]);
        self.w2.copy_from_slice(&p[h * d + h..h * d + 2 * h]);
        self.b2 = p[h * d + 2 * h];
    }

    /// Hidden activations, `n × hidden`.
    fn hidden_layer(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let w1 = DMatrix::from_row_slice(self.hidden, self.inputs, &self.w1);
        let mut z = x * w1.transpose();
        for (mut col, &b) in z.column_iter_mut().zip(&self.b1) {
            col.apply(|v| *v = (*v + b).tanh());
        }
        z
    }

    /// Outputs for each row of `x` (`n × inputs`).
    pub fn forward(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let a = self.hidden_layer(x);
        let out = a * DVector::from_column_slice(&self.w2);
        out.iter().map(|v| v + self.b2).collect()
    }

    pub fn eval_row(&self, x: &[f64]) -> f64 {
        let mut y = self.b2;
        for k in 0..self.hidden {
            let row = &self.w1[k * self.inputs..(k + 1) * self.inputs];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[k];
            y += self.w2[k] * z.tanh();
        }
        y
    }

    /// `∂y/∂params` for each row of `x`.
    pub fn jacobian(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let (n, d, h) = (x.nrows(), self.inputs, self.hidden);
        let a = self.hidden_layer(x);
        let mut j = DMatrix::zeros(n, self.n_params());
        for k in 0..h {
            let w2 = self.w2[k];
            for i in 0..n {
                let act = a[(i, k)];
                let g = w2 * (1.0 - act * act);
                for m in 0..d {
                    j[(i, k * d + m)] = g * x[(i, m)];
                }
                j[(i, h * d + k)] = g;
                j[(i, h * d + h + k)] = act;
            }
        }
        j.column_mut(h * d + 2 * h).fill(1.0);
        j
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = crate::seed::rng(2);
        let x = DMatrix::from_fn(12, 3, |_, _| rng.random_range(-1.5..1.5));
        let net = TanhMlp::init(3, 4, 0.8, 0.1, 5).unwrap();
        let j = net.jacobian(&x);
        let p = net.params();
        let h = 1e-6;
        for q in 0..p.len() {
            let mut hi = net.clone();
            let mut lo = net.clone();
            let (mut ph, mut pl) = (p.clone(), p.clone());
            ph[q] += h;
            pl[q] -= h;
            hi.set_params(&ph);
            lo.set_params(&pl);
            let (yh, yl) = (hi.forward(&x), lo.forward(&x));
            for i in 0..12 {
                let fd = (yh[i] - yl[i]) / (2.0 * h);
                assert!((fd - j[(i, q)]).abs() <= 1e-6 * fd.abs().max(1.0), "param {q}");
            }
        }
    }

    #[test]
    fn row_and_batch_agree() {
        let net = TanhMlp::init(2, 3, 0.5, -0.2, 1).unwrap();
        let x = DMatrix::from_row_slice(2, 2, &[0.3, -1.0, 2.0, 0.5]);
        let y = net.forward(&x);
        assert!((y[0] - net.eval_row(&[0.3, -1.0])).abs() < 1e-12);
        assert!((y[1] - net.eval_row(&[2.0, 0.5])).abs() < 1e-12);
    }
}
