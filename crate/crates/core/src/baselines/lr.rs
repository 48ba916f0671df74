//! Per-bin likelihood ratios.
//!
//! Each feature is cut into a lower tail below p10, equal-width bins between
//! p10 and p90, and an upper tail above p90. A bin's ratio is its share of
//! landslide cells over its share of all cells. Every cell counts as one unit
//! of area.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{quantile_sorted, resolve_features};
use crate::{Dataset, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrFeature {
    pub name: String,
    /// Sorted, distinct inner edges; bin `k` holds `edges[k-1] <= v < edges[k]`.
    pub edges: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Fraction of training cells in each bin.
    pub area: Vec<f64>,
}

impl LrFeature {
    pub fn bin(&self, v: f64) -> usize {
        self.edges.partition_point(|&e| e <= v)
    }

    pub fn ratio(&self, v: f64) -> f64 {
        self.ratios[self.bin(v)]
    }

    /// `Σ area_k · LR_k`; 1 by construction.
    pub fn area_weighted_mean(&self) -> f64 {
        self.area.iter().zip(&self.ratios).map(|(a, r)| a * r).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub format: String,
    pub version: u32,
    pub features: Vec<LrFeature>,
}

const LR_FORMAT: &str = "lr-model";

/// Inner edges for `bins` bins: p10, `bins − 2` equal-width bins up to p90.
/// Coincident edges are merged.
fn bin_edges(sorted: &[f64], bins: usize) -> Vec<f64> {
    let lo = quantile_sorted(sorted, 0.1);
    let hi = quantile_sorted(sorted, 0.9);
    let inner = bins - 2;
    let mut edges: Vec<f64> = (0..=inner).map(|k| lo + (hi - lo) * k as f64 / inner as f64).collect();
    edges[inner] = hi;
    edges.dedup();
    edges
}

/// Likelihood ratios of one feature from parallel values and labels.
pub fn lr_feature(name: &str, values: &[f64], labels: &[u8], bins: usize) -> Result<LrFeature> {
    if bins < 3 {
        return Err(Error::Config("likelihood ratios need at least 3 bins".into()));
    }
    let total_pos = labels.iter().filter(|&&l| l == 1).count();
    if total_pos == 0 || total_pos == labels.len() {
        return Err(Error::Data("likelihood ratios need both classes in the training rows".into()));
    }
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut f = LrFeature {
        name: name.to_string(),
        edges: bin_edges(&sorted, bins),
        ratios: Vec::new(),
        area: Vec::new(),
    };
    let nb = f.edges.len() + 1;
    let (mut cells, mut pos) = (vec![0usize; nb], vec![0usize; nb]);
    for (&v, &l) in values.iter().zip(labels) {
        let b = f.bin(v);
        cells[b] += 1;
        pos[b] += l as usize;
    }
    f.area = cells.iter().map(|&c| c as f64 / n).collect();
    f.ratios = cells
        .iter()
        .zip(&pos)
        .map(|(&c, &p)| {
            if c == 0 {
                0.0
            } else {
                (p as f64 / total_pos as f64) / (c as f64 / n)
            }
        })
        .collect();
    Ok(f)
}

pub fn lr_train(ds: &Dataset, features: &[String], rows: &[usize], bins: usize) -> Result<LrModel> {
    let cols = resolve_features(ds, features)?;
    let labels: Vec<u8> = rows.iter().map(|&i| ds.labels()[i]).collect();
    let features = cols
        .iter()
        .map(|&j| {
            let values: Vec<f64> = rows.iter().map(|&i| ds.value(i, j)).collect();
            lr_feature(&ds.feature_names()[j], &values, &labels, bins)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LrModel {
        format: LR_FORMAT.into(),
        version: 1,
        features,
    })
}

impl LrModel {
    /// Sum of the per-feature ratios of the bins containing the row's values.
    pub fn score(&self, ds: &Dataset, row: usize) -> Result<f64> {
        self.features
            .iter()
            .map(|f| {
                let j = ds
                    .feature_index(&f.name)
                    .ok_or_else(|| Error::Data(format!("feature '{}' is not in the dataset", f.name)))?;
                Ok(f.ratio(ds.value(row, j)))
            })
            .sum()
    }

    pub fn score_rows(&self, ds: &Dataset, rows: &[usize]) -> Result<Vec<f64>> {
        rows.iter().map(|&i| self.score(ds, i)).collect()
    }

    pub fn feature(&self, name: &str) -> Option<&LrFeature> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Model(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: LrModel = serde_json::from_str(&text).map_err(|e| Error::Model(e.to_string()))?;
        if m.format != LR_FORMAT || m.version != 1 {
            return Err(Error::Model(format!("unsupported format {} v{}", m.format, m.version)));
        }
        Ok(m)
    }
}
