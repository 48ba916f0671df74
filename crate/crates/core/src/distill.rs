//! Fractional and parallel knowledge distillation, and superposition.
//!
//! Fractional distillation splits the teacher's soft targets into one target
//! per feature by round-robin residual fitting: in every round each feature
//! in turn fits a small RBF net to the current residual, and that net's
//! output is subtracted from the residual. A feature's target is the sum of
//! its outputs over all rounds. Parallel distillation then fits one final
//! subnet per feature to its target, independently of the others.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lm::LmConfig;
use crate::metrics::auroc;
use crate::monomial::CompositeEncoder;
use crate::rbf::{init_for_inputs, ModelMetadata, RbfSubnet, SnnModel, DEFAULT_NEURONS};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    /// Neurons in each fractional-stage net.
    pub stage_neurons: usize,
    /// LM epochs per fractional-stage fit.
    pub stage_epochs: usize,
    /// Rounds without AUROC improvement before stopping.
    pub patience: usize,
    pub max_rounds: usize,
    /// Neurons in each final subnet.
    pub neurons: usize,
    /// LM epochs per final subnet fit.
    pub epochs: usize,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            stage_neurons: 4,
            stage_epochs: 15,
            patience: 2,
            max_rounds: 20,
            neurons: DEFAULT_NEURONS,
            epochs: 100,
            seed: 0,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stage_neurons == 0 || self.neurons == 0 {
            return Err(Error::Config("distillation nets need at least one neuron".into()));
        }
        if self.max_rounds == 0 || self.patience == 0 {
            return Err(Error::Config("distillation needs max_rounds and patience of at least 1".into()));
        }
        Ok(())
    }
}

/// Bookkeeping for fractional distillation.
///
/// Invariant: `residual = original − Σ_{i,j} outputs[i][j]` elementwise.
#[derive(Debug, Clone)]
pub struct DistillState {
    pub residual: Vec<f64>,
    pub original: Vec<f64>,
    /// `outputs[i][j]`: output of feature `i`'s net in round `j`.
    pub outputs: Vec<Vec<Vec<f64>>>,
    /// AUROC of `Σ outputs` against the labels after each accepted round.
    pub auroc_trace: Vec<f64>,
}

impl DistillState {
    pub fn new(soft_targets: &[f64], n_features: usize) -> Self {
        DistillState {
            residual: soft_targets.to_vec(),
            original: soft_targets.to_vec(),
            outputs: vec![Vec::new(); n_features],
            auroc_trace: Vec::new(),
        }
    }

    pub fn rounds(&self) -> usize {
        self.auroc_trace.len()
    }

    /// Records feature `i`'s output for the current round and subtracts it.
    pub fn record(&mut self, i: usize, output: Vec<f64>) {
        for (r, o) in self.residual.iter_mut().zip(&output) {
            *r -= o;
        }
        self.outputs[i].push(output);
    }

    /// `Σ_j outputs[i][j]` for each feature.
    pub fn feature_targets(&self) -> Vec<Vec<f64>> {
        self.outputs
            .iter()
            .map(|rounds| {
                let mut t = vec![0.0; self.original.len()];
                for o in rounds {
                    for (a, b) in t.iter_mut().zip(o) {
                        *a += b;
                    }
                }
                t
            })
            .collect()
    }

    /// `Σ_{i,j} outputs[i][j]` per sample.
    pub fn total(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.original.len()];
        for rounds in &self.outputs {
            for o in rounds {
                for (a, b) in t.iter_mut().zip(o) {
                    *a += b;
                }
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: usize,
    pub feature: String,
    /// RMSE of this step's net against the residual it was fitted to.
    pub rmse: f64,
    /// AUROC of the running sum after the round (same for every row of a round).
    pub auroc: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct FractionalResult {
    /// One target vector per feature, parallel to the input columns.
    pub targets: Vec<Vec<f64>>,
    pub state: DistillState,
    pub trace: Vec<TraceRow>,
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Fits a fresh `v`-neuron net of `column → target`; returns it unchanged
/// as a constant at the target mean if the column is constant.
fn fit_net(column: &[f64], target: &[f64], v: usize, epochs: usize, seed: u64) -> Result<RbfSubnet> {
    let mut net = match init_for_inputs(v, column, seed) {
        Ok(n) => n,
        Err(_) => {
            let mean = target.iter().sum::<f64>() / target.len() as f64;
            return Ok(RbfSubnet::constant(v, mean));
        }
    };
    net.fit(column, target, None, &LmConfig::default().with_epochs(epochs))?;
    Ok(net)
}

/// Round-robin residual fitting over `columns` (standardized composite
/// values, most important feature first) against `soft_targets`.
///
/// A round that lowers AUROC is rolled back; a round that does not raise it
/// counts toward `patience`.
pub fn fractional_distill(
    soft_targets: &[f64],
    columns: &[Vec<f64>],
    feature_labels: &[String],
    labels: &[u8],
    cfg: &DistillConfig,
) -> Result<FractionalResult> {
    cfg.validate()?;
    if columns.is_empty() {
        return Err(Error::Data("fractional distillation needs at least one feature".into()));
    }
    let n = soft_targets.len();
    if columns.iter().any(|c| c.len() != n) || labels.len() != n || feature_labels.len() != columns.len() {
        return Err(Error::Data("distillation inputs have inconsistent lengths".into()));
    }
    if soft_targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite soft targets".into()));
    }
    let mut state = DistillState::new(soft_targets, columns.len());
    let mut trace = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut stale = 0;
    for round in 1..=cfg.max_rounds {
        let snapshot = state.clone();
        let mut rows = Vec::with_capacity(columns.len());
        for (i, col) in columns.iter().enumerate() {
            let s = seed::derive(seed::derive_str(cfg.seed, &feature_labels[i]), round as u64);
            let net = fit_net(col, &state.residual, cfg.stage_neurons, cfg.stage_epochs, s)
                .map_err(|e| Error::Numerical(format!("distilling '{}': {e}", feature_labels[i])))?;
            let out: Vec<f64> = col.iter().map(|&x| net.eval(x)).collect();
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("non-finite residual for '{}'", feature_labels[i])));
            }
            let err = rmse(&out, &state.residual);
            state.record(i, out);
            rows.push((feature_labels[i].clone(), err));
        }
        let a = auroc(&state.total(), labels)?;
        let accepted = a >= best;
        trace.extend(rows.into_iter().map(|(feature, rmse)| TraceRow {
            round,
            feature,
            rmse,
            auroc: a,
            accepted,
        }));
        if !accepted {
            state = snapshot;
            stale += 1;
        } else {
            state.auroc_trace.push(a);
            if a > best {
                best = a;
                stale = 0;
            } else {
                stale += 1;
            }
        }
        log::debug!("fractional round {round}: AUROC {a:.5} accepted={accepted}");
        if stale >= cfg.patience {
            break;
        }
    }
    Ok(FractionalResult {
        targets: state.feature_targets(),
        state,
        trace,
    })
}

/// Fits one final subnet per feature to its target, independently.
pub fn parallel_distill(
    targets: &[Vec<f64>],
    columns: &[Vec<f64>],
    feature_labels: &[String],
    cfg: &DistillConfig,
) -> Result<Vec<RbfSubnet>> {
    cfg.validate()?;
    if targets.len() != columns.len() || feature_labels.len() != columns.len() {
        return Err(Error::Data("one target and one label per feature required".into()));
    }
    targets
        .par_iter()
        .zip(columns.par_iter())
        .zip(feature_labels.par_iter())
        .map(|((t, c), label)| {
            fit_net(c, t, cfg.neurons, cfg.epochs, seed::derive_str(cfg.seed, label))
                .map_err(|e| Error::Numerical(format!("fitting subnet for '{label}': {e}")))
        })
        .collect()
}

/// Sums subnets under unit output weights.
pub fn superpose(encoder: CompositeEncoder, subnets: Vec<RbfSubnet>, metadata: ModelMetadata) -> Result<SnnModel> {
    SnnModel::new(encoder, subnets, metadata)
}

pub fn write_trace_csv(trace: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::from("round,feature,rmse,auroc,accepted\n");
    for r in trace {
        let _ = writeln!(s, "{},{},{},{},{}", r.round, r.feature, r.rmse, r.auroc, r.accepted);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy_columns(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<u8>) {
        let mut rng = crate::seed::rng(seed);
        let x: Vec<[f64; 4]> = (0..n).map(|_| std::array::from_fn(|_| rng.random_range(0..2u8) as f64)).collect();
        let a: Vec<f64> = x.iter().map(|r| r[0] * r[1]).collect();
        let b: Vec<f64> = x.iter().map(|r| r[2] * r[3]).collect();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p * q).collect();
        let y: Vec<f64> = (0..n).map(|i| a[i] + b[i] - 2.0 * ab[i]).collect();
        let labels = y.iter().map(|&v| v as u8).collect();
        (vec![ab, a, b], y, labels)
    }

    fn names() -> Vec<String> {
        vec!["x1*x2*x3*x4".into(), "x1*x2".into(), "x3*x4".into()]
    }

    #[test]
    fn bookkeeping_identity_holds() {
        let (cols, y, labels) = toy_columns(400, 1);
        let res = fractional_distill(&y, &cols, &names(), &labels, &DistillConfig::default()).unwrap();
        let total = res.state.total();
        for i in 0..y.len() {
            assert!((y[i] - res.state.residual[i] - total[i]).abs() <= 1e-12);
        }
        assert!(res.state.auroc_trace.windows(2).all(|w| w[1] >= w[0]));
        let sum: Vec<f64> = (0..y.len()).map(|i| res.targets.iter().map(|t| t[i]).sum()).collect();
        assert_eq!(auroc(&sum, &labels).unwrap(), 1.0);
    }

    #[test]
    fn first_step_subtracts_first_output() {
        let (cols, y, labels) = toy_columns(200, 2);
        let cfg = DistillConfig {
            max_rounds: 1,
            ..DistillConfig::default()
        };
        let res = fractional_distill(&y, &cols[..1], &names()[..1], &labels, &cfg).unwrap();
        let o = &res.state.outputs[0][0];
        for i in 0..y.len() {
            assert_eq!(res.state.residual[i], y[i] - o[i]);
        }
    }

    #[test]
    fn steps_recover_coefficients() {
        let (cols, y, labels) = toy_columns(1000, 3);
        let cfg = DistillConfig::default();
        let res = fractional_distill(&y, &cols, &names(), &labels, &cfg).unwrap();
        let nets = parallel_distill(&res.targets, &cols, &names(), &cfg).unwrap();
        let step = |k: usize| {
            let (lo, hi) = cols[k].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            nets[k].eval(hi) - nets[k].eval(lo)
        };
        let expected = [-2.0, 1.0, 1.0];
        for k in 0..3 {
            assert!((step(k) - expected[k]).abs() <= 0.15, "feature {k}: {}", step(k));
        }
    }

    #[test]
    fn constant_target_gives_flat_subnet() {
        let col: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let nets = parallel_distill(&[vec![0.7; 50]], std::slice::from_ref(&col), &["f".into()], &DistillConfig::default()).unwrap();
        for &x in &col {
            assert!((nets[0].eval(x) - 0.7).abs() < 1e-6);
        }
    }

    #[test]
    fn final_subnet_has_at_least_stage_capacity() {
        let mut rng = crate::seed::rng(6);
        let col: Vec<f64> = (0..300).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t: Vec<f64> = col.iter().map(|x| (2.0 * x).tanh() + 0.3 * x * x).collect();
        let cfg = DistillConfig::default();
        let stage = fit_net(&col, &t, cfg.stage_neurons, cfg.epochs, 1).unwrap();
        let fin = parallel_distill(std::slice::from_ref(&t), std::slice::from_ref(&col), &["f".into()], &cfg).unwrap();
        let e_stage = rmse(&col.iter().map(|&x| stage.eval(x)).collect::<Vec<_>>(), &t);
        let e_final = rmse(&col.iter().map(|&x| fin[0].eval(x)).collect::<Vec<_>>(), &t);
        assert!(e_final <= e_stage + 1e-3, "{e_final} vs {e_stage}");
    }

    #[test]
    fn parallel_fits_are_order_independent() {
        let (cols, y, _) = toy_columns(200, 4);
        let targets = vec![y.clone(), y.clone(), y];
        let cfg = DistillConfig::default();
        let fwd = parallel_distill(&targets, &cols, &names(), &cfg).unwrap();
        let mut rc = cols.clone();
        rc.reverse();
        let mut rn = names();
        rn.reverse();
        let rev = parallel_distill(&targets, &rc, &rn, &cfg).unwrap();
        for k in 0..3 {
            assert_eq!(fwd[k], rev[2 - k]);
        }
    }
}
