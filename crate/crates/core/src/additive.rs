//! Small additive RBF networks over several features with one shared bias.
//!
//! Used as the group model in the tournament and as the incremental model
//! in forward selection. Each feature gets its own Gaussian terms, so the
//! model's per-feature contributions are well defined.

use nalgebra::DMatrix;

use crate::lm::{lm_fit, FitReport, LmConfig};
use crate::rbf::{init_for_inputs, RbfSubnet};
use crate::{seed, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveNet {
    /// One term per feature; each term's own `c` is held at 0.
    pub terms: Vec<RbfSubnet>,
    pub bias: f64,
}

impl AdditiveNet {
    /// Evenly spaced Gaussians over each column's range; bias at the
    /// weighted target mean.
    pub fn init(
        columns: &[&[f64]],
        targets: &[f64],
        weights: &[f64],
        neurons: usize,
        seed: u64,
    ) -> Result<Self> {
        let terms = columns
            .iter()
            .enumerate()
            .map(|(k, col)| {
                init_for_inputs(neurons, col, seed::derive(seed, k as u64)).or_else(|_| {
                    // Constant column: a flat term that never moves the output.
                    Ok(RbfSubnet::constant(neurons, 0.0))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let wsum: f64 = weights.iter().sum();
        let bias = if wsum > 0.0 {
            targets.iter().zip(weights).map(|(t, w)| t * w).sum::<f64>() / wsum
        } else {
            0.0
        };
        Ok(AdditiveNet { terms, bias })
    }

    pub fn n_features(&self) -> usize {
        self.terms.len()
    }

    fn term_params(&self) -> usize {
        self.terms.first().map_or(0, |t| 3 * t.neurons())
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.terms.len() * self.term_params() + 1);
        for t in &self.terms {
            p.extend_from_slice(&t.w);
            p.extend_from_slice(&t.a);
            p.extend_from_slice(&t.b);
        }
        p.push(self.bias);
        p
    }

    fn set_params(&mut self, p: &[f64]) {
        let v = self.terms.first().map_or(0, |t| t.neurons());
        for (k, t) in self.terms.iter_mut().enumerate() {
            let o = 3 * v * k;
            t.w.copy_from_slice(&p[o..o + v]);
            t.a.copy_from_slice(&p[o + v..o + 2 * v]);
            t.b.copy_from_slice(&p[o + 2 * v..o + 3 * v]);
        }
        self.bias = p[p.len() - 1];
    }

    /// Output for each row; `columns[k][i]` is feature `k` of row `i`.
    pub fn predict(&self, columns: &[&[f64]]) -> Vec<f64> {
        let n = columns.first().map_or(0, |c| c.len());
        let mut out = vec![self.bias; n];
        for (t, col) in self.terms.iter().zip(columns) {
            for (o, &x) in out.iter_mut().zip(col.iter()) {
                *o += t.eval(x);
            }
        }
        out
    }

    /// Contribution of term `k` at every row.
    pub fn term_outputs(&self, k: usize, column: &[f64]) -> Vec<f64> {
        column.iter().map(|&x| self.terms[k].eval(x)).collect()
    }

    fn jacobian(&self, columns: &[&[f64]]) -> DMatrix<f64> {
        let n = columns.first().map_or(0, |c| c.len());
        let tp = self.term_params();
        let mut j = DMatrix::zeros(n, tp * self.terms.len() + 1);
        for (k, (t, col)) in self.terms.iter().zip(columns).enumerate() {
            let block = t.jacobian(col);
            j.view_mut((0, k * tp), (n, tp)).copy_from(&block.columns(0, tp));
        }
        j.column_mut(tp * self.terms.len()).fill(1.0);
        j
    }

    /// Weighted least-squares fit starting from the current parameters.
    pub fn fit(
        &mut self,
        columns: &[&[f64]],
        targets: &[f64],
        weights: &[f64],
        cfg: &LmConfig,
    ) -> Result<FitReport> {
        let template = self.clone();
        let residuals = |p: &[f64]| {
            let mut net = template.clone();
            net.set_params(p);
            net.predict(columns).iter().zip(targets).map(|(y, t)| y - t).collect()
        };
        let jac = |p: &[f64]| {
            let mut net = template.clone();
            net.set_params(p);
            net.jacobian(columns)
        };
        let (p, report) = lm_fit(&self.params(), residuals, jac, weights, cfg)?;
        self.set_params(&p);
        Ok(report)
    }

    /// The net without feature `k`; remaining parameters are kept as a warm start.
    pub fn without(&self, k: usize) -> AdditiveNet {
        let mut terms = self.terms.clone();
        terms.remove(k);
        AdditiveNet {
            terms,
            bias: self.bias,
        }
    }

    /// The net with one more feature term appended.
    pub fn with_term(&self, term: RbfSubnet) -> AdditiveNet {
        let mut terms = self.terms.clone();
        terms.push(RbfSubnet { c: 0.0, ..term });
        AdditiveNet {
            terms,
            bias: self.bias,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = crate::seed::rng(3);
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..15).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let views: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let mut net = AdditiveNet::init(&views, &[0.0; 15], &[1.0; 15], 2, 1).unwrap();
        for t in &mut net.terms {
            for w in &mut t.w {
                *w = rng.random_range(-1.0..1.0);
            }
        }
        let j = net.jacobian(&views);
        let p = net.params();
        let h = 1e-6;
        for q in 0..p.len() {
            let mut hi = net.clone();
            let mut lo = net.clone();
            let mut ph = p.clone();
            let mut pl = p.clone();
            ph[q] += h;
            pl[q] -= h;
            hi.set_params(&ph);
            lo.set_params(&pl);
            let (yh, yl) = (hi.predict(&views), lo.predict(&views));
            for i in 0..15 {
                let fd = (yh[i] - yl[i]) / (2.0 * h);
                assert!((fd - j[(i, q)]).abs() <= 1e-6 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn fits_sum_of_two_steps() {
        let mut rng = crate::seed::rng(4);
        let n = 200;
        let x1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a * a - 0.5 * b).collect();
        let views = [x1.as_slice(), x2.as_slice()];
        let w = vec![1.0; n];
        let mut net = AdditiveNet::init(&views, &y, &w, 3, 9).unwrap();
        let rep = net.fit(&views, &y, &w, &LmConfig::default().with_epochs(200)).unwrap();
        assert!(rep.sse / (n as f64) < 1e-4, "{rep:?}");
        let reduced = net.without(0);
        assert_eq!(reduced.n_features(), 1);
        assert_eq!(reduced.terms[0], net.terms[1]);
    }
}
