//! Logistic regression by damped iteratively reweighted least squares, with a
//! pairwise collinearity screen.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::resolve_features;
use crate::dataset::Standardizer;
use crate::lm::solve_damped;
use crate::{Dataset, Error, Result};

/// Largest allowed pairwise |Pearson R| (variance inflation factor below 5).
pub const COLLINEARITY_LIMIT: f64 = 0.894;
/// Cap on the Euclidean norm of the standardized coefficients.
pub const COEF_NORM_CAP: f64 = 50.0;
const MAX_ITER: usize = 100;
const LOGR_FORMAT: &str = "logr-model";

#[derive(Debug, Clone, PartialEq)]
pub struct CollinearityReport {
    pub names: Vec<String>,
    /// Symmetric Pearson correlation matrix.
    pub r: Vec<Vec<f64>>,
    /// Pairs with |R| above the limit.
    pub offending: Vec<(String, String, f64)>,
}

impl CollinearityReport {
    pub fn passed(&self) -> bool {
        self.offending.is_empty()
    }
}

pub fn collinearity_screen(ds: &Dataset, features: &[String], rows: &[usize]) -> Result<CollinearityReport> {
    let cols = resolve_features(ds, features)?;
    if cols.len() < 2 {
        return Err(Error::Data("collinearity screen needs at least two features".into()));
    }
    let names: Vec<String> = cols.iter().map(|&j| ds.feature_names()[j].clone()).collect();
    let data: Vec<Vec<f64>> = cols.iter().map(|&j| rows.iter().map(|&i| ds.value(i, j)).collect()).collect();
    let views: Vec<&[f64]> = data.iter().map(|c| c.as_slice()).collect();
    let all: Vec<usize> = (0..rows.len()).collect();
    let sc = Standardizer::fit(&views, &all, &names)?;
    let z: Vec<Vec<f64>> = data
        .iter()
        .enumerate()
        .map(|(j, c)| c.iter().map(|&v| sc.apply(j, v)).collect())
        .collect();
    let n = rows.len() as f64;
    let k = cols.len();
    let mut r = vec![vec![1.0; k]; k];
    let mut offending = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let v = z[a].iter().zip(&z[b]).map(|(x, y)| x * y).sum::<f64>() / n;
            r[a][b] = v;
            r[b][a] = v;
            if v.abs() > COLLINEARITY_LIMIT {
                offending.push((names[a].clone(), names[b].clone(), v));
            }
        }
    }
    Ok(CollinearityReport { names, r, offending })
}

/// Fitted on standardized features; `score` applies the same scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRModel {
    pub format: String,
    pub version: u32,
    pub features: Vec<String>,
    pub scaler: Standardizer,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// True when the coefficient norm hit the cap (separable data).
    pub capped: bool,
    pub iterations: usize,
}

fn sigmoid(c: f64) -> f64 {
    if c >= 0.0 {
        1.0 / (1.0 + (-c).exp())
    } else {
        let e = c.exp();
        e / (1.0 + e)
    }
}

/// Negative log-likelihood, stable for large |c|.
fn nll(c: &DVector<f64>, y: &[f64]) -> f64 {
    c.iter()
        .zip(y)
        .map(|(&c, &y)| {
            let softplus = if c > 0.0 { c + (-c).exp().ln_1p() } else { c.exp().ln_1p() };
            softplus - y * c
        })
        .sum()
}

pub fn logr_train(ds: &Dataset, features: &[String], rows: &[usize]) -> Result<LogRModel> {
    let cols = resolve_features(ds, features)?;
    let names: Vec<String> = cols.iter().map(|&j| ds.feature_names()[j].clone()).collect();
    if cols.len() >= 2 {
        let screen = collinearity_screen(ds, &names, rows)?;
        if let Some((a, b, r)) = screen.offending.first() {
            return Err(Error::Data(format!(
                "features '{a}' and '{b}' are collinear (R = {r:.3}); drop one of them"
            )));
        }
    }
    let labels = ds.labels();
    let pos = rows.iter().filter(|&&i| labels[i] == 1).count();
    if pos == 0 || pos == rows.len() {
        return Err(Error::Data("logistic regression needs both classes".into()));
    }
    let raw: Vec<Vec<f64>> = cols.iter().map(|&j| ds.column(j)).collect();
    let views: Vec<&[f64]> = raw.iter().map(|c| c.as_slice()).collect();
    let scaler = Standardizer::fit(&views, rows, &names)?;

    let (n, d) = (rows.len(), cols.len() + 1);
    let mut x = DMatrix::zeros(n, d);
    for (r, &i) in rows.iter().enumerate() {
        x[(r, 0)] = 1.0;
        for j in 0..cols.len() {
            x[(r, j + 1)] = scaler.apply(j, raw[j][i]);
        }
    }
    let y: Vec<f64> = rows.iter().map(|&i| labels[i] as f64).collect();
    let prevalence = pos as f64 / n as f64;
    let mut beta = DVector::zeros(d);
    beta[0] = (prevalence / (1.0 - prevalence)).ln();
    let mut loss = nll(&(&x * &beta), &y);
    let mut lambda = 1e-8;
    let mut capped = false;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        let c = &x * &beta;
        let p: Vec<f64> = c.iter().map(|&v| sigmoid(v)).collect();
        let mut xw = x.clone();
        for (mut row, pi) in xw.row_iter_mut().zip(&p) {
            row *= pi * (1.0 - pi);
        }
        let hess = x.tr_mul(&xw);
        let resid = DVector::from_iterator(n, p.iter().zip(&y).map(|(p, y)| p - y));
        let grad = x.tr_mul(&resid);
        let mut accepted = None;
        while lambda <= 1e12 {
            if let Some(delta) = solve_damped(&hess, &grad, lambda) {
                let trial = &beta + &delta;
                let tl = nll(&(&x * &trial), &y);
                if tl.is_finite() && tl <= loss {
                    accepted = Some((trial, tl, delta.amax()));
                    break;
                }
            }
            lambda *= 10.0;
        }
        let Some((trial, tl, step)) = accepted else { break };
        let improvement = loss - tl;
        beta = trial;
        loss = tl;
        lambda = (lambda * 0.1).max(1e-12);
        let norm = beta.rows(1, d - 1).norm();
        if norm > COEF_NORM_CAP {
            let s = COEF_NORM_CAP / norm;
            for k in 1..d {
                beta[k] *= s;
            }
            capped = true;
            log::warn!("logistic coefficients reached the norm cap of {COEF_NORM_CAP}; data are likely separable");
            break;
        }
        if step < 1e-10 || improvement <= 1e-14 * loss.max(1.0) {
            break;
        }
    }
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("logistic regression produced non-finite coefficients".into()));
    }
    Ok(LogRModel {
        format: LOGR_FORMAT.into(),
        version: 1,
        features: names,
        scaler,
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        capped,
        iterations,
    })
}

impl LogRModel {
    fn columns(&self, ds: &Dataset) -> Result<Vec<usize>> {
        resolve_features(ds, &self.features)
    }

    /// Coefficients on the raw feature scale.
    pub fn raw_coefficients(&self) -> Vec<f64> {
        self.coefficients.iter().zip(&self.scaler.std).map(|(b, s)| b / s).collect()
    }

    /// Intercept on the raw feature scale.
    pub fn raw_intercept(&self) -> f64 {
        self.intercept
            - self
                .coefficients
                .iter()
                .zip(self.scaler.mean.iter().zip(&self.scaler.std))
                .map(|(b, (m, s))| b * m / s)
                .sum::<f64>()
    }

    /// `c = b₀ + Σ bᵢxᵢ` for each row.
    pub fn logits(&self, ds: &Dataset, rows: &[usize]) -> Result<Vec<f64>> {
        let cols = self.columns(ds)?;
        Ok(rows
            .iter()
            .map(|&i| {
                self.intercept
                    + cols
                        .iter()
                        .enumerate()
                        .map(|(k, &j)| self.coefficients[k] * self.scaler.apply(k, ds.value(i, j)))
                        .sum::<f64>()
            })
            .collect())
    }

    /// `p = eᶜ / (eᶜ + 1)`.
    pub fn score(&self, ds: &Dataset, rows: &[usize]) -> Result<Vec<f64>> {
        Ok(self.logits(ds, rows)?.into_iter().map(sigmoid).collect())
    }

    /// Raw-scale terms `bᵢxᵢ` per row, one entry per feature.
    pub fn contributions(&self, ds: &Dataset, rows: &[usize]) -> Result<Vec<Vec<f64>>> {
        let cols = self.columns(ds)?;
        let b = self.raw_coefficients();
        Ok(rows
            .iter()
            .map(|&i| cols.iter().zip(&b).map(|(&j, b)| b * ds.value(i, j)).collect())
            .collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Model(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: LogRModel = serde_json::from_str(&text).map_err(|e| Error::Model(e.to_string()))?;
        if m.format != LOGR_FORMAT || m.version != 1 {
            return Err(Error::Model(format!("unsupported format {} v{}", m.format, m.version)));
        }
        Ok(m)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
