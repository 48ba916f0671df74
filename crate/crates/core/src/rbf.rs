//! Per-feature radial-basis subnetworks and the superposed SNN model.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Standardizer};
use crate::lm::{lm_fit, FitReport, LmConfig};
use crate::monomial::{CompositeBasis, CompositeEncoder, MonomialRecord};
use crate::{Error, Result};

pub const DEFAULT_NEURONS: usize = 6;

/// `S(χ) = Σ_k w_k·exp(−(a_k·χ + b_k)²) + c`.
///
/// Flat parameter layout used by the optimizer: `[w.., a.., b.., c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfSubnet {
    pub w: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: f64,
}

impl RbfSubnet {
    pub fn neurons(&self) -> usize {
        self.w.len()
    }

    pub fn n_params(&self) -> usize {
        3 * self.w.len() + 1
    }

    /// A subnet that outputs `c` everywhere.
    pub fn constant(v: usize, c: f64) -> Self {
        RbfSubnet {
            w: vec![0.0; v],
            a: vec![1.0; v],
            b: vec![0.0; v],
            c,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(&self.w);
        p.extend_from_slice(&self.a);
        p.extend_from_slice(&self.b);
        p.push(self.c);
        p
    }

    pub fn from_params(p: &[f64]) -> Result<Self> {
        if p.len() < 4 || !(p.len() - 1).is_multiple_of(3) {
            return Err(Error::Model(format!("{} is not a valid subnet parameter count", p.len())));
        }
        let v = (p.len() - 1) / 3;
        Ok(RbfSubnet {
            w: p[..v].to_vec(),
            a: p[v..2 * v].to_vec(),
            b: p[2 * v..3 * v].to_vec(),
            c: p[3 * v],
        })
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|v| v.is_finite())
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for k in 0..self.w.len() {
            let u = self.a[k] * x + self.b[k];
            s += self.w[k] * (-u * u).exp();
        }
        s + self.c
    }

    /// `∂S/∂(w, a, b, c)` at each input, one row per input.
    pub fn jacobian(&self, xs: &[f64]) -> DMatrix<f64> {
        let v = self.neurons();
        let mut j = DMatrix::zeros(xs.len(), self.n_params());
        for (i, &x) in xs.iter().enumerate() {
            for k in 0..v {
                let u = self.a[k] * x + self.b[k];
                let e = (-u * u).exp();
                let g = -2.0 * u * self.w[k] * e;
                j[(i, k)] = e;
                j[(i, v + k)] = g * x;
                j[(i, 2 * v + k)] = g;
            }
            j[(i, 3 * v)] = 1.0;
        }
        j
    }

    /// Least-squares fit to `(xs, targets)` starting from `self`.
    pub fn fit(
        &mut self,
        xs: &[f64],
        targets: &[f64],
        weights: Option<&[f64]>,
        cfg: &LmConfig,
    ) -> Result<FitReport> {
        if xs.len() != targets.len() || xs.is_empty() {
            return Err(Error::Data(format!(
                "subnet fit needs equal, non-empty inputs and targets ({} vs {})",
                xs.len(),
                targets.len()
            )));
        }
        let ones;
        let w = match weights {
            Some(w) => w,
            None => {
                ones = vec![1.0; xs.len()];
                &ones
            }
        };
        let residuals = |p: &[f64]| {
            let net = RbfSubnet::from_params(p).expect("layout fixed by caller");
            xs.iter().zip(targets).map(|(&x, &t)| net.eval(x) - t).collect()
        };
        let jac = |p: &[f64]| RbfSubnet::from_params(p).expect("layout fixed by caller").jacobian(xs);
        let (p, report) = lm_fit(&self.params(), residuals, jac, w, cfg)?;
        *self = RbfSubnet::from_params(&p)?;
        Ok(report)
    }
}

/// Evenly spaced Gaussians over `[min, max]`: centers at the midpoints of
/// `v` equal cells, width equal to one cell, small random output weights.
pub fn init_subnet(v: usize, min: f64, max: f64, seed: u64) -> Result<RbfSubnet> {
    if v == 0 {
        return Err(Error::Config("subnet needs at least one neuron".into()));
    }
    if !(max > min) || !min.is_finite() || !max.is_finite() {
        return Err(Error::Data(format!("degenerate input range [{min}, {max}]")));
    }
    let range = max - min;
    let a = v as f64 / range;
    let mut rng = crate::seed::rng(seed);
    let mut net = RbfSubnet::constant(v, 0.0);
    for k in 0..v {
        let center = min + (k as f64 + 0.5) * range / v as f64;
        net.a[k] = a;
        net.b[k] = -a * center;
        net.w[k] = rng.random_range(-0.1..0.1);
    }
    Ok(net)
}

/// `init_subnet` over the observed range of `xs`.
pub fn init_for_inputs(v: usize, xs: &[f64], seed: u64) -> Result<RbfSubnet> {
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    init_subnet(v, lo, hi, seed)
}

/// Provenance carried in the model file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    /// Training region or dataset tag.
    #[serde(default)]
    pub region: String,
    /// Selected features in ranking order.
    #[serde(default)]
    pub selection: Vec<String>,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

/// The superposed model `S_t = Σ_j S_j(χ_j)`; every output weight is 1.
#[derive(Debug, Clone)]
pub struct SnnModel {
    pub encoder: CompositeEncoder,
    pub subnets: Vec<RbfSubnet>,
    /// Classification threshold `S_t*`, once one has been chosen.
    pub threshold: Option<f64>,
    pub metadata: ModelMetadata,
}

impl SnnModel {
    pub fn new(
        encoder: CompositeEncoder,
        subnets: Vec<RbfSubnet>,
        metadata: ModelMetadata,
    ) -> Result<Self> {
        if subnets.is_empty() {
            return Err(Error::Model("model has no subnets".into()));
        }
        if subnets.len() != encoder.len() {
            return Err(Error::Model(format!(
                "{} subnets for {} features",
                subnets.len(),
                encoder.len()
            )));
        }
        let labels = encoder.labels();
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l) {
                return Err(Error::Model(format!("duplicate feature '{l}'")));
            }
        }
        if let Some(k) = subnets.iter().position(|s| !s.is_finite()) {
            return Err(Error::Model(format!("subnet '{}' has non-finite parameters", labels[k])));
        }
        Ok(SnnModel {
            encoder,
            subnets,
            threshold: None,
            metadata,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.encoder.input_names.len()
    }

    pub fn labels(&self) -> Vec<String> {
        self.encoder.labels()
    }

    /// Output and per-subnet contributions for already-encoded features.
    pub fn eval_encoded(&self, chi: &[f64]) -> (f64, Vec<f64>) {
        let parts: Vec<f64> = self.subnets.iter().zip(chi).map(|(s, &x)| s.eval(x)).collect();
        (sum_in_order(&parts), parts)
    }

    /// `(S_t, [S_j])` for one raw feature row.
    pub fn eval_snn(&self, row: &[f64]) -> Result<(f64, Vec<f64>)> {
        let chi = self.encoder.encode_row(row)?;
        Ok(self.eval_encoded(&chi))
    }

    /// `S_t` for the given dataset rows, in that order.
    pub fn predict(&self, ds: &Dataset, rows: &[usize]) -> Result<Vec<f64>> {
        self.check_inputs(ds)?;
        Ok(rows
            .par_iter()
            .map(|&i| self.eval_encoded(&self.encoder.encode_row(ds.row(i)).expect("width checked")).0)
            .collect())
    }

    /// Contributions `S_j` for the given rows: one vector per subnet.
    pub fn contributions(&self, ds: &Dataset, rows: &[usize]) -> Result<Vec<Vec<f64>>> {
        self.check_inputs(ds)?;
        let chis = self.encoder.encode_columns(ds, rows);
        Ok(self
            .subnets
            .par_iter()
            .zip(chis.par_iter())
            .map(|(s, col)| col.iter().map(|&x| s.eval(x)).collect())
            .collect())
    }

    /// Ensures the dataset has this model's input features in order.
    pub fn check_inputs(&self, ds: &Dataset) -> Result<()> {
        if ds.feature_names() != self.encoder.input_names.as_slice() {
            return Err(Error::Data(format!(
                "dataset features [{}] do not match model features [{}]",
                ds.feature_names().join(", "),
                self.encoder.input_names.join(", ")
            )));
        }
        Ok(())
    }

    /// The model without subnet `j`.
    pub fn without(&self, j: usize) -> Result<SnnModel> {
        let keep: Vec<usize> = (0..self.subnets.len()).filter(|&k| k != j).collect();
        let mut m = SnnModel::new(
            self.encoder.select(&keep),
            keep.iter().map(|&k| self.subnets[k].clone()).collect(),
            self.metadata.clone(),
        )?;
        m.threshold = self.threshold;
        Ok(m)
    }
}

/// Left-to-right sum; fixed order makes `S_t` bit-identical to the sum of
/// the reported contributions.
#[inline]
pub fn sum_in_order(parts: &[f64]) -> f64 {
    parts.iter().fold(0.0, |acc, &v| acc + v)
}

pub const MODEL_FORMAT: &str = "snn-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SubnetRecord {
    feature: MonomialRecord,
    mean: f64,
    std: f64,
    w: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    features: Vec<String>,
    basis: CompositeBasis,
    input_scaler: Option<Standardizer>,
    subnets: Vec<SubnetRecord>,
    threshold: Option<f64>,
    #[serde(default)]
    metadata: ModelMetadata,
}

pub fn model_to_json(model: &SnnModel) -> Result<String> {
    let names = &model.encoder.input_names;
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        features: names.clone(),
        basis: model.encoder.basis,
        input_scaler: model.encoder.input_scaler.clone(),
        subnets: model
            .subnets
            .iter()
            .zip(&model.encoder.monomials)
            .enumerate()
            .map(|(k, (s, m))| SubnetRecord {
                feature: MonomialRecord::new(m, names),
                mean: model.encoder.scaler.mean[k],
                std: model.encoder.scaler.std[k],
                w: s.w.clone(),
                a: s.a.clone(),
                b: s.b.clone(),
                c: s.c,
            })
            .collect(),
        threshold: model.threshold,
        metadata: model.metadata.clone(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Model(e.to_string()))
}

pub fn model_from_json(text: &str) -> Result<SnnModel> {
    let probe: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Model(format!("malformed JSON: {e}")))?;
    match probe.get("version").and_then(|v| v.as_u64()) {
        None => return Err(Error::Model("missing version field".into())),
        Some(v) if v != MODEL_VERSION as u64 => {
            return Err(Error::Model(format!(
                "unsupported model version {v} (expected {MODEL_VERSION})"
            )))
        }
        Some(_) => {}
    }
    let file: ModelFile =
        serde_json::from_value(probe).map_err(|e| Error::Model(format!("malformed model: {e}")))?;
    if file.format != MODEL_FORMAT {
        return Err(Error::Model(format!("unknown format '{}'", file.format)));
    }
    if let Some(s) = &file.input_scaler {
        if s.len() != file.features.len() || s.std.len() != s.mean.len() {
            return Err(Error::Model("input standardizer width differs from feature list".into()));
        }
    }
    if (file.basis == CompositeBasis::Standardized) != file.input_scaler.is_some() {
        return Err(Error::Model("input standardizer must be present exactly for the standardized basis".into()));
    }
    let mut seen = HashSet::new();
    let mut monomials = Vec::with_capacity(file.subnets.len());
    let mut subnets = Vec::with_capacity(file.subnets.len());
    let mut scaler = Standardizer {
        mean: vec![],
        std: vec![],
    };
    for rec in &file.subnets {
        let label = &rec.feature.label;
        if !seen.insert(label.clone()) {
            return Err(Error::Model(format!("duplicate feature label '{label}'")));
        }
        let m = rec.feature.to_monomial()?;
        if m.max_index() >= file.features.len() {
            return Err(Error::Model(format!("feature '{label}' refers to an unknown input")));
        }
        if &m.label(&file.features) != label {
            return Err(Error::Model(format!(
                "label '{label}' does not match its exponents ('{}')",
                m.label(&file.features)
            )));
        }
        let v = rec.w.len();
        if v == 0 || rec.a.len() != v || rec.b.len() != v {
            return Err(Error::Model(format!("feature '{label}': inconsistent neuron arrays")));
        }
        if !(rec.std > 0.0) {
            return Err(Error::Model(format!("feature '{label}': non-positive std")));
        }
        monomials.push(m);
        scaler.mean.push(rec.mean);
        scaler.std.push(rec.std);
        subnets.push(RbfSubnet {
            w: rec.w.clone(),
            a: rec.a.clone(),
            b: rec.b.clone(),
            c: rec.c,
        });
    }
    let encoder = CompositeEncoder {
        basis: file.basis,
        input_names: file.features,
        input_scaler: file.input_scaler,
        monomials,
        scaler,
    };
    let mut model = SnnModel::new(encoder, subnets, file.metadata)?;
    model.threshold = file.threshold;
    Ok(model)
}

pub fn save_model(model: &SnnModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_json(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SnnModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
