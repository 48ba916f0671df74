//! Min-max categorized inputs and a 200-200-2 ReLU classifier trained with
//! Adam on minibatches.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{quantile_sorted, resolve_features};
use crate::{seed, Dataset, Error, Result};

/// Decile categories mapped linearly onto `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Categorizer {
    pub features: Vec<String>,
    /// Distinct decile edges p10..p90 per feature.
    pub edges: Vec<Vec<f64>>,
    /// Lowest and highest category seen in training, per feature.
    pub range: Vec<(usize, usize)>,
    pub lower: f64,
    pub upper: f64,
}

fn decile_edges(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut e: Vec<f64> = (1..10).map(|k| quantile_sorted(&sorted, k as f64 / 10.0)).collect();
    e.dedup();
    e
}

fn category(edges: &[f64], v: f64) -> usize {
    edges.partition_point(|&e| e <= v)
}

impl Categorizer {
    pub fn fit(ds: &Dataset, features: &[String], rows: &[usize], lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::Config("categorization needs lower < upper".into()));
        }
        let cols = resolve_features(ds, features)?;
        let mut c = Categorizer {
            features: cols.iter().map(|&j| ds.feature_names()[j].clone()).collect(),
            edges: Vec::new(),
            range: Vec::new(),
            lower,
            upper,
        };
        for (k, &j) in cols.iter().enumerate() {
            let vals: Vec<f64> = rows.iter().map(|&i| ds.value(i, j)).collect();
            let edges = decile_edges(&vals);
            let cats = vals.iter().map(|&v| category(&edges, v));
            let lo = cats.clone().min().unwrap_or(0);
            let hi = cats.max().unwrap_or(0);
            if hi == lo {
                return Err(Error::Data(format!("feature '{}' is constant after categorization", c.features[k])));
            }
            c.edges.push(edges);
            c.range.push((lo, hi));
        }
        Ok(c)
    }

    /// Normalized category of value `v` of feature `k`, clamped to `[lower, upper]`.
    pub fn apply(&self, k: usize, v: f64) -> f64 {
        let (lo, hi) = self.range[k];
        let cat = category(&self.edges[k], v) as f64;
        let t = (cat - lo as f64) / (hi - lo) as f64;
        (t * (self.upper - self.lower) + self.lower).clamp(self.lower, self.upper)
    }

    /// Inputs as a `features × rows` matrix.
    pub fn matrix(&self, ds: &Dataset, rows: &[usize]) -> Result<DMatrix<f64>> {
        let cols = resolve_features(ds, &self.features)?;
        Ok(DMatrix::from_fn(cols.len(), rows.len(), |k, r| self.apply(k, ds.value(rows[r], cols[k]))))
    }
}

/// Categorizes one feature's values into deciles and maps them to `[lower, upper]`.
pub fn minmax_categorize(values: &[f64], lower: f64, upper: f64) -> Result<Vec<f64>> {
    let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
    let ds = Dataset::new(vec!["v".into()], rows, vec![0; values.len()], None)?;
    let all: Vec<usize> = (0..values.len()).collect();
    let c = Categorizer::fit(&ds, &[], &all, lower, upper)?;
    Ok(values.iter().map(|&v| c.apply(0, v)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub batch: usize,
    pub learning_rate: f64,
    /// Learning rate multiplier applied every `drop_every` epochs.
    pub drop_factor: f64,
    pub drop_every: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Smallest validation-loss decrease that counts as improvement.
    pub min_delta: f64,
    pub validation: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![200, 200],
            batch: 64,
            learning_rate: 2e-4,
            drop_factor: 0.1,
            drop_every: 5,
            max_epochs: 200,
            patience: 10,
            min_delta: 1e-4,
            validation: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    pub batches: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    w: DMatrix<f64>,
    b: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct MlpBaseline {
    pub categorizer: Categorizer,
    layers: Vec<Dense>,
    /// Set when training saw one class only; the score is that class.
    pub constant: Option<f64>,
    pub history: Vec<EpochLog>,
    pub batch: usize,
}

/// Forward pass; returns every layer's activation (inputs first) and the
/// softmax output.
fn forward(layers: &[Dense], x: &DMatrix<f64>) -> (Vec<DMatrix<f64>>, DMatrix<f64>) {
    let mut acts = vec![x.clone()];
    for (k, l) in layers.iter().enumerate() {
        let mut z = &l.w * acts.last().unwrap();
        for mut col in z.column_iter_mut() {
            col += &l.b;
        }
        if k + 1 < layers.len() {
            z.apply(|v| *v = v.max(0.0));
            acts.push(z);
        } else {
            for mut col in z.column_iter_mut() {
                let m = col.max();
                col.apply(|v| *v = (*v - m).exp());
                let s = col.sum();
                col /= s;
            }
            return (acts, z);
        }
    }
    unreachable!("network has an output layer")
}

fn cross_entropy(probs: &DMatrix<f64>, y: &[u8]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(r, &c)| -probs[(c as usize, r)].max(1e-300).ln())
        .sum::<f64>()
        / y.len() as f64
}

struct Adam {
    m: Vec<Dense>,
    v: Vec<Dense>,
    t: i32,
}

impl Adam {
    fn new(layers: &[Dense]) -> Self {
        let zero = |l: &Dense| Dense {
            w: DMatrix::zeros(l.w.nrows(), l.w.ncols()),
            b: DVector::zeros(l.b.len()),
        };
        Adam {
            m: layers.iter().map(zero).collect(),
            v: layers.iter().map(zero).collect(),
            t: 0,
        }
    }

    fn step(&mut self, layers: &mut [Dense], grads: &[Dense], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = B1 * m[i] + (1.0 - B1) * g[i];
                v[i] = B2 * v[i] + (1.0 - B2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + EPS);
            }
        };
        for k in 0..layers.len() {
            update(layers[k].w.as_mut_slice(), grads[k].w.as_slice(), self.m[k].w.as_mut_slice(), self.v[k].w.as_mut_slice());
            update(layers[k].b.as_mut_slice(), grads[k].b.as_slice(), self.m[k].b.as_mut_slice(), self.v[k].b.as_mut_slice());
        }
    }
}

/// Gradients of the mean cross-entropy over the batch.
fn backward(layers: &[Dense], acts: &[DMatrix<f64>], probs: &DMatrix<f64>, y: &[u8]) -> Vec<Dense> {
    let n = y.len() as f64;
    let mut delta = probs.clone();
    for (r, &c) in y.iter().enumerate() {
        delta[(c as usize, r)] -= 1.0;
    }
    delta /= n;
    let mut grads = Vec::with_capacity(layers.len());
    for k in (0..layers.len()).rev() {
        let input = &acts[k];
        grads.push(Dense {
            w: &delta * input.transpose(),
            b: delta.column_sum(),
        });
        if k > 0 {
            let mut d = layers[k].w.tr_mul(&delta);
            d.zip_apply(input, |g, a| {
                if a <= 0.0 {
                    *g = 0.0
                }
            });
            delta = d;
        }
    }
    grads.reverse();
    grads
}

pub fn mlp_baseline_train(ds: &Dataset, features: &[String], rows: &[usize], cfg: &MlpConfig) -> Result<MlpBaseline> {
    if cfg.batch == 0 || cfg.max_epochs == 0 || cfg.drop_every == 0 || !(cfg.validation > 0.0 && cfg.validation < 1.0) {
        return Err(Error::Config("invalid MLP baseline configuration".into()));
    }
    let categorizer = Categorizer::fit(ds, features, rows, 0.1, 0.9)?;
    let labels = ds.labels();
    let pos = rows.iter().filter(|&&i| labels[i] == 1).count();
    if pos == 0 || pos == rows.len() {
        log::info!("MLP baseline: one class in training data; stopping early with a constant output");
        return Ok(MlpBaseline {
            categorizer,
            layers: Vec::new(),
            constant: Some(if pos == 0 { 0.0 } else { 1.0 }),
            history: Vec::new(),
            batch: cfg.batch,
        });
    }

    let mut rng = seed::rng(seed::derive_str(cfg.seed, "mlp-baseline"));
    let mut shuffled = rows.to_vec();
    shuffled.shuffle(&mut rng);
    let n_val = ((rows.len() as f64 * cfg.validation).round() as usize).clamp(1, rows.len() - 1);
    let (val_rows, fit_rows) = shuffled.split_at(n_val);
    let x_fit = categorizer.matrix(ds, fit_rows)?;
    let x_val = categorizer.matrix(ds, val_rows)?;
    let y_fit: Vec<u8> = fit_rows.iter().map(|&i| labels[i]).collect();
    let y_val: Vec<u8> = val_rows.iter().map(|&i| labels[i]).collect();

    let mut sizes = vec![x_fit.nrows()];
    sizes.extend(&cfg.hidden);
    sizes.push(2);
    let mut layers: Vec<Dense> = sizes
        .windows(2)
        .map(|w| {
            let he = Normal::new(0.0, (2.0 / w[0] as f64).sqrt()).expect("positive std");
            Dense {
                w: DMatrix::from_fn(w[1], w[0], |_, _| he.sample(&mut rng)),
                b: DVector::zeros(w[1]),
            }
        })
        .collect();
    let mut adam = Adam::new(&layers);
    let mut best = (f64::INFINITY, layers.clone());
    let mut stale = 0;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..fit_rows.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        let lr = cfg.learning_rate * cfg.drop_factor.powi(((epoch - 1) / cfg.drop_every) as i32);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch) {
            let xb = x_fit.select_columns(chunk);
            let yb: Vec<u8> = chunk.iter().map(|&r| y_fit[r]).collect();
            let (acts, probs) = forward(&layers, &xb);
            total += cross_entropy(&probs, &yb) * chunk.len() as f64;
            let grads = backward(&layers, &acts, &probs, &yb);
            adam.step(&mut layers, &grads, lr);
            batches += 1;
        }
        let train_loss = total / fit_rows.len() as f64;
        let val_loss = cross_entropy(&forward(&layers, &x_val).1, &y_val);
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Numerical(format!("MLP baseline diverged at epoch {epoch}")));
        }
        log::debug!("MLP epoch {epoch}: lr {lr:e}, batch {}, train {train_loss:.5}, val {val_loss:.5}", cfg.batch);
        history.push(EpochLog {
            epoch,
            learning_rate: lr,
            batches,
            train_loss,
            val_loss,
        });
        if val_loss < best.0 - cfg.min_delta {
            best = (val_loss, layers.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok(MlpBaseline {
        categorizer,
        layers: best.1,
        constant: None,
        history,
        batch: cfg.batch,
    })
}

impl MlpBaseline {
    /// Positive-class probability per row.
    pub fn score(&self, ds: &Dataset, rows: &[usize]) -> Result<Vec<f64>> {
        if let Some(c) = self.constant {
            return Ok(vec![c; rows.len()]);
        }
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(4096) {
            let x = self.categorizer.matrix(ds, chunk)?;
            let probs = forward(&self.layers, &x).1;
            out.extend(probs.row(1).iter().copied());
        }
        Ok(out)
    }

    pub fn epochs(&self) -> usize {
        self.history.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::auroc;
    use rand::Rng;

    #[test]
    fn categories_span_the_unit_band() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let c = minmax_categorize(&v, 0.1, 0.9).unwrap();
        assert_eq!(c[0], 0.1);
        assert_eq!(c[999], 0.9);
        let mut levels: Vec<f64> = c.clone();
        levels.dedup();
        assert_eq!(levels.len(), 10);
        for w in levels.windows(2) {
            assert!((w[1] - w[0] - 0.8 / 9.0).abs() < 1e-12);
        }
        assert!(c.iter().all(|&x| (0.1..=0.9).contains(&x)));
        assert!(minmax_categorize(&[3.0; 50], 0.1, 0.9).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = crate::seed::rng(1);
        let sizes = [3, 5, 4, 2];
        let layers: Vec<Dense> = sizes
            .windows(2)
            .map(|w| Dense {
                w: DMatrix::from_fn(w[1], w[0], |_, _| rng.random_range(-1.0..1.0)),
                b: DVector::from_fn(w[1], |_, _| rng.random_range(-0.5..0.5)),
            })
            .collect();
        let x = DMatrix::from_fn(3, 7, |_, _| rng.random_range(-1.0..1.0));
        let y: Vec<u8> = (0..7).map(|i| (i % 2) as u8).collect();
        let (acts, probs) = forward(&layers, &x);
        let grads = backward(&layers, &acts, &probs, &y);
        let h = 1e-6;
        for k in 0..layers.len() {
            for idx in 0..layers[k].w.len() {
                let mut hi = layers.clone();
                let mut lo = layers.clone();
                hi[k].w.as_mut_slice()[idx] += h;
                lo[k].w.as_mut_slice()[idx] -= h;
                let fd = (cross_entropy(&forward(&hi, &x).1, &y) - cross_entropy(&forward(&lo, &x).1, &y)) / (2.0 * h);
                assert!((fd - grads[k].w.as_slice()[idx]).abs() < 1e-6, "layer {k} w[{idx}]");
            }
            for idx in 0..layers[k].b.len() {
                let mut hi = layers.clone();
                let mut lo = layers.clone();
                hi[k].b[idx] += h;
                lo[k].b[idx] -= h;
                let fd = (cross_entropy(&forward(&hi, &x).1, &y) - cross_entropy(&forward(&lo, &x).1, &y)) / (2.0 * h);
                assert!((fd - grads[k].b[idx]).abs() < 1e-6);
            }
        }
    }

    fn separable(n: usize, seed: u64) -> Dataset {
        let mut rng = crate::seed::rng(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
        let labels = rows.iter().map(|r| (r[0] > 0.7) as u8).collect();
        Dataset::new(vec!["a".into(), "b".into()], rows, labels, None).unwrap()
    }

    #[test]
    fn separable_data_ranks_well() {
        let ds = separable(10000, 2);
        let all: Vec<usize> = (0..ds.len()).collect();
        let cfg = MlpConfig {
            seed: 3,
            ..MlpConfig::default()
        };
        let m = mlp_baseline_train(&ds, &[], &all, &cfg).unwrap();
        assert!(m.epochs() <= 200);
        assert!(m.history.iter().all(|e| e.batches == (8000usize).div_ceil(64)));
        let p = m.score(&ds, &all).unwrap();
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let a = auroc(&p, ds.labels()).unwrap();
        assert!(a >= 0.95, "{a} {:?}", m.history);
        let again = mlp_baseline_train(&ds, &[], &all, &cfg).unwrap().score(&ds, &all).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn single_class_gives_constant_output() {
        let mut rng = crate::seed::rng(4);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random()]).collect();
        let ds = Dataset::new(vec!["a".into()], rows, vec![0; 200], None).unwrap();
        let all: Vec<usize> = (0..200).collect();
        let m = mlp_baseline_train(&ds, &[], &all, &MlpConfig::default()).unwrap();
        assert_eq!(m.epochs(), 0);
        assert!(m.score(&ds, &all).unwrap().iter().all(|&p| p == 0.0));
    }
}
