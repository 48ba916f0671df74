//! Multistage teacher network.
//!
//! Stage 1 is a tanh MLP on the selected composite features. Stage `k > 1`
//! sees the features plus the outputs of all earlier stages and predicts
//! `skip·y_{k−1} + mlp_k(…)`. It starts at `skip = 1` with a zero output
//! layer, i.e. exactly at the incumbent fit, and LM only accepts improving
//! steps, so stages never raise the training error.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{sample_weights, Dataset};
use crate::lm::{lm_fit, LmConfig};
use crate::metrics;
use crate::mlp::TanhMlp;
use crate::monomial::{CompositeBasis, CompositeEncoder, Monomial, MonomialRecord};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherConfig {
    pub stages: usize,
    pub hidden: usize,
    pub lm: LmConfig,
    /// Cap on training rows (stratified subsample); `None` uses every train row.
    pub max_rows: Option<usize>,
    pub seed: u64,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        TeacherConfig {
            stages: 2,
            hidden: 20,
            lm: LmConfig::default().with_epochs(100),
            max_rows: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherStage {
    pub mlp: TanhMlp,
    /// Weight on the previous stage's output; absent for stage 1.
    pub skip: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TeacherModel {
    pub encoder: CompositeEncoder,
    pub stages: Vec<TeacherStage>,
    /// Weighted training SSE after each stage.
    pub stage_sse: Vec<f64>,
}

/// Stratified subsample of `rows` keeping class proportions.
pub(crate) fn stratified_cap(rows: &[usize], labels: &[u8], cap: usize, seed: u64) -> Vec<usize> {
    if rows.len() <= cap {
        return rows.to_vec();
    }
    let mut rng = seed::rng(seed);
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| labels[i] == 1);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let n_pos = ((cap as f64 * pos.len() as f64 / rows.len() as f64).round() as usize)
        .clamp(1.min(pos.len()), pos.len());
    let n_neg = (cap - n_pos.min(cap)).min(neg.len()).max(1.min(neg.len()));
    let mut out: Vec<usize> = pos[..n_pos].iter().chain(&neg[..n_neg]).copied().collect();
    out.sort_unstable();
    out
}

fn design(encoder: &CompositeEncoder, ds: &Dataset, rows: &[usize]) -> DMatrix<f64> {
    let cols = encoder.encode_columns(ds, rows);
    DMatrix::from_fn(rows.len(), cols.len(), |i, k| cols[k][i])
}

fn with_extra(x: &DMatrix<f64>, extra: &[Vec<f64>]) -> DMatrix<f64> {
    let d = x.ncols();
    DMatrix::from_fn(x.nrows(), d + extra.len(), |i, k| if k < d { x[(i, k)] } else { extra[k - d][i] })
}

impl TeacherModel {
    /// Raw outputs for a prepared design matrix: one vector per stage.
    fn stage_outputs(&self, x: &DMatrix<f64>) -> Vec<Vec<f64>> {
        let mut outs: Vec<Vec<f64>> = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            let input = with_extra(x, &outs);
            let mut y = stage.mlp.forward(&input);
            if let (Some(s), Some(prev)) = (stage.skip, outs.last()) {
                for (v, p) in y.iter_mut().zip(prev) {
                    *v += s * p;
                }
            }
            outs.push(y);
        }
        outs
    }

    /// Unclamped teacher output for the given rows.
    pub fn predict(&self, ds: &Dataset, rows: &[usize]) -> Result<Vec<f64>> {
        if ds.feature_names() != self.encoder.input_names.as_slice() {
            return Err(Error::Data("dataset features do not match the teacher's inputs".into()));
        }
        let x = design(&self.encoder, ds, rows);
        Ok(self.stage_outputs(&x).pop().unwrap_or_default())
    }

    pub fn labels(&self) -> Vec<String> {
        self.encoder.labels()
    }
}

/// Teacher outputs for every sample in dataset order.
pub fn soft_targets(model: &TeacherModel, ds: &Dataset) -> Result<Vec<f64>> {
    model.predict(ds, &(0..ds.len()).collect::<Vec<_>>())
}

/// Trains the multistage teacher on the train partition.
pub fn train_teacher(
    ds: &Dataset,
    features: &[Monomial],
    basis: CompositeBasis,
    cfg: &TeacherConfig,
) -> Result<TeacherModel> {
    if features.is_empty() {
        return Err(Error::Data("teacher needs at least one feature".into()));
    }
    if cfg.stages == 0 {
        return Err(Error::Config("teacher needs at least one stage".into()));
    }
    let train = ds.train_indices();
    sample_weights(ds.labels(), &train)?;
    let encoder = CompositeEncoder::fit(ds, features.to_vec(), basis)?;
    let rows = match cfg.max_rows {
        Some(cap) => stratified_cap(&train, ds.labels(), cap, seed::derive(cfg.seed, 0x7eac)),
        None => train,
    };
    let weights = sample_weights(ds.labels(), &rows)?;
    let y = ds.targets(&rows);
    let x = design(&encoder, ds, &rows);

    let mut model = TeacherModel {
        encoder,
        stages: Vec::with_capacity(cfg.stages),
        stage_sse: Vec::with_capacity(cfg.stages),
    };
    let mut outs: Vec<Vec<f64>> = Vec::new();
    for k in 0..cfg.stages {
        let input = with_extra(&x, &outs);
        let stage_seed = seed::derive(cfg.seed, k as u64 + 1);
        let (stage, out, sse) = match outs.last() {
            None => {
                let wsum: f64 = weights.iter().sum();
                let mean = y.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>() / wsum;
                let mut mlp = TanhMlp::init(input.ncols(), cfg.hidden, 0.1, mean, stage_seed)?;
                let res = |p: &[f64]| {
                    let mut m = mlp.clone();
                    m.set_params(p);
                    m.forward(&input).iter().zip(&y).map(|(o, t)| o - t).collect()
                };
                let jac = |p: &[f64]| {
                    let mut m = mlp.clone();
                    m.set_params(p);
                    m.jacobian(&input)
                };
                let (p, rep) = lm_fit(&mlp.params(), res, jac, &weights, &cfg.lm)
                    .map_err(|e| Error::Numerical(format!("teacher stage 1: {e}")))?;
                mlp.set_params(&p);
                let out = mlp.forward(&input);
                (TeacherStage { mlp, skip: None }, out, rep.sse)
            }
            Some(prev) => {
                let mut mlp = TanhMlp::init(input.ncols(), cfg.hidden, 0.0, 0.0, stage_seed)?;
                let np = mlp.n_params();
                let res = |p: &[f64]| {
                    let mut m = mlp.clone();
                    m.set_params(&p[..np]);
                    let s = p[np];
                    m.forward(&input)
                        .iter()
                        .zip(prev)
                        .zip(&y)
                        .map(|((o, q), t)| o + s * q - t)
                        .collect()
                };
                let jac = |p: &[f64]| {
                    let mut m = mlp.clone();
                    m.set_params(&p[..np]);
                    let mj = m.jacobian(&input);
                    let mut j = DMatrix::zeros(mj.nrows(), np + 1);
                    j.columns_mut(0, np).copy_from(&mj);
                    j.column_mut(np).copy_from_slice(prev);
                    j
                };
                let mut p0 = mlp.params();
                p0.push(1.0);
                let (p, rep) = lm_fit(&p0, res, jac, &weights, &cfg.lm)
                    .map_err(|e| Error::Numerical(format!("teacher stage {}: {e}", k + 1)))?;
                mlp.set_params(&p[..np]);
                let skip = p[np];
                let out: Vec<f64> = mlp.forward(&input).iter().zip(prev).map(|(o, q)| o + skip * q).collect();
                (TeacherStage { mlp, skip: Some(skip) }, out, rep.sse)
            }
        };
        log::debug!("teacher stage {} weighted SSE {sse:.6}", k + 1);
        model.stages.push(stage);
        model.stage_sse.push(sse);
        outs.push(out);
    }
    if log::log_enabled!(log::Level::Info) {
        let fit = outs.last().expect("at least one stage");
        let labels: Vec<u8> = rows.iter().map(|&i| ds.labels()[i]).collect();
        if let Ok(a) = metrics::auroc(fit, &labels) {
            log::info!("teacher train AUROC {a:.4}");
        }
    }
    Ok(model)
}

#[derive(Serialize, Deserialize)]
struct TeacherFile {
    features: Vec<MonomialRecord>,
    stages: Vec<TeacherStage>,
    stage_sse: Vec<f64>,
}

/// Provenance dump of a trained teacher (not loadable as a predictor).
pub fn save_teacher(model: &TeacherModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = TeacherFile {
        features: model
            .encoder
            .monomials
            .iter()
            .map(|m| MonomialRecord::new(m, &model.encoder.input_names))
            .collect(),
        stages: model.stages.clone(),
        stage_sse: model.stage_sse.clone(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Model(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monomial::Monomial;
    use rand::Rng;

    fn two_feature(n: usize, seed: u64) -> Dataset {
        let mut rng = crate::seed::rng(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let labels = rows.iter().map(|r| (r[0] + 0.5 * r[1] > 0.1) as u8).collect();
        Dataset::new(vec!["a".into(), "b".into()], rows, labels, None).unwrap()
    }

    #[test]
    fn separable_data_is_learned_and_stages_never_hurt() {
        let ds = two_feature(300, 1);
        let feats = vec![Monomial::single(0), Monomial::single(1)];
        let cfg = TeacherConfig {
            stages: 3,
            hidden: 6,
            ..TeacherConfig::default()
        };
        let t = train_teacher(&ds, &feats, CompositeBasis::Raw, &cfg).unwrap();
        for w in t.stage_sse.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", t.stage_sse);
        }
        let s = soft_targets(&t, &ds).unwrap();
        assert_eq!(s.len(), ds.len());
        assert!(metrics::auroc(&s, ds.labels()).unwrap() >= 0.99);
    }

    #[test]
    fn row_order_does_not_matter() {
        let ds = two_feature(120, 2);
        let feats = vec![Monomial::single(0), Monomial::single(1)];
        let cfg = TeacherConfig {
            hidden: 4,
            lm: LmConfig::default().with_epochs(20),
            ..TeacherConfig::default()
        };
        let t = train_teacher(&ds, &feats, CompositeBasis::Raw, &cfg).unwrap();
        let fwd: Vec<usize> = (0..ds.len()).collect();
        let rev: Vec<usize> = (0..ds.len()).rev().collect();
        let a = t.predict(&ds, &fwd).unwrap();
        let mut b = t.predict(&ds, &rev).unwrap();
        b.reverse();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]];
        let ds = Dataset::new(vec!["a".into(), "b".into()], rows, vec![1, 1, 1], None).unwrap();
        let err = train_teacher(&ds, &[Monomial::single(0)], CompositeBasis::Raw, &TeacherConfig::default())
            .unwrap_err();
        assert!(err.to_string().contains("single-class"), "{err}");
    }

    #[test]
    fn stratified_cap_keeps_both_classes() {
        let labels: Vec<u8> = (0..1000).map(|i| (i % 50 == 0) as u8).collect();
        let rows: Vec<usize> = (0..1000).collect();
        let s = stratified_cap(&rows, &labels, 100, 3);
        assert_eq!(s.len(), 100);
        assert_eq!(s.iter().filter(|&&i| labels[i] == 1).count(), 2);
    }
}
