//! Contribution analyses for fitted models.
//!
//! Curves show one subnet's output over the central range of its composite
//! value, next to the likelihood ratios of the same value. Window maps tile
//! the grid and compare mean contributions between landslide (ld) and
//! non-landslide (nld) cells; the feature with the largest difference is the
//! window's dominant control.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::logr::{logit, LogRModel};
use crate::baselines::{lr_feature, quantile_sorted};
use crate::raster::RasterGrid;
use crate::rbf::{sum_in_order, SnnModel};
use crate::{Dataset, Error, Result};

/// 50 × 50 cells of 30 m = 2.25 km².
pub const DEFAULT_WINDOW_CELLS: usize = 50;
pub const DEFAULT_CURVE_SAMPLES: usize = 200;
const LR_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrOverlayBin {
    /// Bin extent in raw composite units, clipped to the curve range.
    pub lo: f64,
    pub hi: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionCurve {
    pub feature: String,
    /// Raw composite values, strictly increasing.
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    pub overlay: Vec<LrOverlayBin>,
    /// Subnet output where the overlay first crosses LR = 1.
    pub lr_one_level: Option<f64>,
}

fn model_feature(model: &SnnModel, feature: &str) -> Result<usize> {
    model
        .labels()
        .iter()
        .position(|l| l == feature)
        .ok_or_else(|| Error::Data(format!("feature '{feature}' is not in the model")))
}

/// Leftmost `x` where the piecewise-linear overlay through bin midpoints hits 1.
fn lr_one_crossing(overlay: &[LrOverlayBin]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = overlay.iter().map(|b| (0.5 * (b.lo + b.hi), b.ratio)).collect();
    if let Some(&(x, _)) = pts.first().filter(|p| p.1 == 1.0) {
        return Some(x);
    }
    pts.windows(2).find_map(|w| {
        let ((x0, r0), (x1, r1)) = (w[0], w[1]);
        if r1 == 1.0 {
            Some(x1)
        } else if (r0 - 1.0) * (r1 - 1.0) < 0.0 {
            Some(x0 + (1.0 - r0) / (r1 - r0) * (x1 - x0))
        } else {
            None
        }
    })
}

/// Samples subnet `feature` over the [p0.5, p99.5] range of its raw composite
/// value on `rows`, with likelihood ratios of the same value on those rows.
pub fn contribution_curve(
    model: &SnnModel,
    feature: &str,
    ds: &Dataset,
    rows: &[usize],
    n_samples: usize,
) -> Result<ContributionCurve> {
    let j = model_feature(model, feature)?;
    model.check_inputs(ds)?;
    if n_samples < 2 || rows.is_empty() {
        return Err(Error::Config("a curve needs at least two samples and one row".into()));
    }
    let raw: Vec<f64> = rows.iter().map(|&i| model.encoder.raw_row(ds.row(i))[j]).collect();
    let mut sorted = raw.clone();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (quantile_sorted(&sorted, 0.005), quantile_sorted(&sorted, 0.995));
    if !(hi > lo) {
        return Err(Error::Data(format!("'{feature}' is constant over its central range")));
    }
    let subnet = &model.subnets[j];
    let eval = |x: f64| subnet.eval(model.encoder.scaler.apply(j, x));
    let x: Vec<f64> = (0..n_samples)
        .map(|k| lo + (hi - lo) * k as f64 / (n_samples - 1) as f64)
        .collect();
    let values: Vec<f64> = x.iter().map(|&v| eval(v)).collect();

    let labels: Vec<u8> = rows.iter().map(|&i| ds.labels()[i]).collect();
    let (overlay, lr_one_level) = match lr_feature(feature, &raw, &labels, LR_BINS) {
        Ok(f) => {
            let mut bounds = vec![lo];
            bounds.extend(f.edges.iter().map(|e| e.clamp(lo, hi)));
            bounds.push(hi);
            let overlay: Vec<LrOverlayBin> = bounds
                .windows(2)
                .zip(&f.ratios)
                .filter(|(w, _)| w[1] > w[0])
                .map(|(w, &ratio)| LrOverlayBin { lo: w[0], hi: w[1], ratio })
                .collect();
            let level = lr_one_crossing(&overlay).map(eval);
            (overlay, level)
        }
        Err(e) => {
            log::warn!("no likelihood-ratio overlay for '{feature}': {e}");
            (Vec::new(), None)
        }
    };
    Ok(ContributionCurve {
        feature: feature.to_string(),
        x,
        values,
        overlay,
        lr_one_level,
    })
}

pub fn write_curve_csv(curve: &ContributionCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::from("x,contribution\n");
    for (x, v) in curve.x.iter().zip(&curve.values) {
        let _ = writeln!(s, "{x},{v}");
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn write_overlay_csv(curve: &ContributionCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::from("lo,hi,lr\n");
    for b in &curve.overlay {
        let _ = writeln!(s, "{},{},{}", b.lo, b.hi, b.ratio);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Which cells count as landslides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LdSource {
    /// Cells whose model output reaches the threshold.
    Modeled(f64),
    /// Cells labelled 1 in the dataset.
    Mapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_cells: usize,
    /// Ground size of one cell, for the output raster.
    pub cell_size: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            window_cells: DEFAULT_WINDOW_CELLS,
            cell_size: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    /// Window row and column in the window grid.
    pub window: (usize, usize),
    /// First grid row and column covered.
    pub origin: (i64, i64),
    pub n_ld: usize,
    pub n_nld: usize,
    /// `S̄_{j,ld} − S̄_{j,nld}` per feature, in model order.
    pub delta: Vec<f64>,
    pub dominant: usize,
}

#[derive(Debug, Clone)]
pub struct WindowMap {
    pub features: Vec<String>,
    /// Windows holding both ld and nld cells only.
    pub reports: Vec<WindowReport>,
    /// Window-resolution grid of dominant feature indices; NODATA elsewhere.
    pub dominant: RasterGrid,
}

/// Index of the largest value; ties go to the lowest index.
fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

struct WindowGrid {
    origin: (i64, i64),
    rows: usize,
    cols: usize,
    size: usize,
}

impl WindowGrid {
    fn new(pos: &[(i64, i64)], size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Config("window must be at least one cell".into()));
        }
        let (r0, c0) = pos.iter().fold((i64::MAX, i64::MAX), |(a, b), p| (a.min(p.0), b.min(p.1)));
        let (r1, c1) = pos.iter().fold((i64::MIN, i64::MIN), |(a, b), p| (a.max(p.0), b.max(p.1)));
        Ok(WindowGrid {
            origin: (r0, c0),
            rows: ((r1 - r0) as usize) / size + 1,
            cols: ((c1 - c0) as usize) / size + 1,
            size,
        })
    }

    fn index(&self, p: (i64, i64)) -> usize {
        let wr = (p.0 - self.origin.0) as usize / self.size;
        let wc = (p.1 - self.origin.1) as usize / self.size;
        wr * self.cols + wc
    }

    fn raster(&self, cell_size: f64) -> RasterGrid {
        RasterGrid::new(self.rows, self.cols, cell_size * self.size as f64)
    }
}

/// Per-window mean contribution differences from per-feature contribution
/// columns and a landslide flag per row.
pub fn window_deltas(
    contributions: &[Vec<f64>],
    ld: &[bool],
    pos: &[(i64, i64)],
    window_cells: usize,
) -> Result<Vec<WindowReport>> {
    if pos.is_empty() || ld.len() != pos.len() || contributions.iter().any(|c| c.len() != pos.len()) {
        return Err(Error::Data("window inputs have inconsistent lengths".into()));
    }
    let grid = WindowGrid::new(pos, window_cells)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); grid.rows * grid.cols];
    for (r, &p) in pos.iter().enumerate() {
        members[grid.index(p)].push(r);
    }
    let reports = members
        .par_iter()
        .enumerate()
        .filter_map(|(w, rows)| {
            let n_ld = rows.iter().filter(|&&r| ld[r]).count();
            let n_nld = rows.len() - n_ld;
            if n_ld == 0 || n_nld == 0 {
                return None;
            }
            let delta: Vec<f64> = contributions
                .iter()
                .map(|col| {
                    let (mut s_ld, mut s_nld) = (0.0, 0.0);
                    for &r in rows {
                        if ld[r] {
                            s_ld += col[r];
                        } else {
                            s_nld += col[r];
                        }
                    }
                    s_ld / n_ld as f64 - s_nld / n_nld as f64
                })
                .collect();
            let (wr, wc) = (w / grid.cols, w % grid.cols);
            Some(WindowReport {
                window: (wr, wc),
                origin: (
                    grid.origin.0 + (wr * grid.size) as i64,
                    grid.origin.1 + (wc * grid.size) as i64,
                ),
                n_ld,
                n_nld,
                dominant: argmax(&delta),
                delta,
            })
        })
        .collect();
    Ok(reports)
}

fn snn_ld_flags(model: &SnnModel, contributions: &[Vec<f64>], ds: &Dataset, rows: &[usize], source: LdSource) -> Vec<bool> {
    match source {
        LdSource::Mapped => rows.iter().map(|&i| ds.labels()[i] == 1).collect(),
        LdSource::Modeled(t) => (0..rows.len())
            .map(|r| {
                let parts: Vec<f64> = (0..model.subnets.len()).map(|j| contributions[j][r]).collect();
                sum_in_order(&parts) >= t
            })
            .collect(),
    }
}

fn grid_positions(ds: &Dataset, rows: &[usize]) -> Result<Vec<(i64, i64)>> {
    let pos = ds
        .grid_pos()
        .ok_or_else(|| Error::Data("window analysis needs row/col grid positions".into()))?;
    Ok(rows.iter().map(|&i| pos[i]).collect())
}

/// Dominant-control map over `rows`.
pub fn delta_sbar_map(
    model: &SnnModel,
    ds: &Dataset,
    rows: &[usize],
    cfg: &WindowConfig,
    source: LdSource,
) -> Result<WindowMap> {
    let pos = grid_positions(ds, rows)?;
    let contributions = model.contributions(ds, rows)?;
    let ld = snn_ld_flags(model, &contributions, ds, rows, source);
    let reports = window_deltas(&contributions, &ld, &pos, cfg.window_cells)?;
    let grid = WindowGrid::new(&pos, cfg.window_cells)?;
    let mut dominant = grid.raster(cfg.cell_size);
    for r in &reports {
        dominant.set(r.window.0, r.window.1, r.dominant as f64);
    }
    Ok(WindowMap {
        features: model.labels(),
        reports,
        dominant,
    })
}

/// Mean and sample standard deviation of each feature's ΔS̄ over windows.
pub fn window_summary(map: &WindowMap) -> Vec<(String, f64, f64)> {
    let n = map.reports.len() as f64;
    map.features
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let mean = map.reports.iter().map(|r| r.delta[j]).sum::<f64>() / n;
            let var = map.reports.iter().map(|r| (r.delta[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (f.clone(), mean, var.sqrt())
        })
        .collect()
}

pub fn write_window_csv(map: &WindowMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::from("window_row,window_col,origin_row,origin_col,n_ld,n_nld,dominant");
    for f in &map.features {
        let _ = write!(s, ",delta_{f}");
    }
    s.push('\n');
    for r in &map.reports {
        let _ = write!(
            s,
            "{},{},{},{},{},{},{}",
            r.window.0, r.window.1, r.origin.0, r.origin.1, r.n_ld, r.n_nld, map.features[r.dominant]
        );
        for d in &r.delta {
            let _ = write!(s, ",{d}");
        }
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Index-to-label sidecar for the dominant-feature raster.
pub fn write_legend(features: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::from("index,feature\n");
    for (k, f) in features.iter().enumerate() {
        let _ = writeln!(s, "{k},{f}");
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedDelta {
    pub feature: String,
    pub delta: f64,
    pub normalized: f64,
}

fn region_deltas(contributions: &[Vec<f64>], ld: &[bool]) -> Result<Vec<f64>> {
    let n_ld = ld.iter().filter(|&&b| b).count();
    if n_ld == 0 || n_ld == ld.len() {
        return Err(Error::Data("need both landslide and non-landslide cells".into()));
    }
    let n_nld = ld.len() - n_ld;
    Ok(contributions
        .iter()
        .map(|col| {
            let (mut a, mut b) = (0.0, 0.0);
            for (v, &l) in col.iter().zip(ld) {
                if l {
                    a += v;
                } else {
                    b += v;
                }
            }
            a / n_ld as f64 - b / n_nld as f64
        })
        .collect())
}

fn ranked(features: Vec<String>, delta: Vec<f64>, scale: f64) -> Vec<NormalizedDelta> {
    let mut out: Vec<NormalizedDelta> = features
        .into_iter()
        .zip(delta)
        .map(|(feature, delta)| NormalizedDelta {
            feature,
            delta,
            normalized: delta / scale,
        })
        .collect();
    out.sort_by(|a, b| b.normalized.total_cmp(&a.normalized));
    out
}

/// `ΔS̄_j / S_t*` over `rows`, ranked descending.
pub fn normalized_deltas_snn(
    model: &SnnModel,
    ds: &Dataset,
    rows: &[usize],
    threshold: f64,
    source: LdSource,
) -> Result<Vec<NormalizedDelta>> {
    if threshold == 0.0 || !threshold.is_finite() {
        return Err(Error::Data(format!("cannot normalize by threshold {threshold}")));
    }
    let contributions = model.contributions(ds, rows)?;
    let ld = snn_ld_flags(model, &contributions, ds, rows, source);
    Ok(ranked(model.labels(), region_deltas(&contributions, &ld)?, threshold))
}

/// `t_a = logit(t) − b₀` on the raw feature scale.
pub fn adjusted_threshold(model: &LogRModel, t: f64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Data(format!("probability threshold {t} must lie strictly between 0 and 1")));
    }
    Ok(logit(t) - model.raw_intercept())
}

/// `(c̄_{i,ld} − c̄_{i,nld}) / t_a` with `c_i = b_i x_i`, ranked descending.
pub fn normalized_deltas_logr(
    model: &LogRModel,
    ds: &Dataset,
    rows: &[usize],
    t: f64,
    source: LdSource,
) -> Result<Vec<NormalizedDelta>> {
    let ta = adjusted_threshold(model, t)?;
    let per_row = model.contributions(ds, rows)?;
    let k = model.features.len();
    let columns: Vec<Vec<f64>> = (0..k).map(|j| per_row.iter().map(|r| r[j]).collect()).collect();
    let ld: Vec<bool> = match source {
        LdSource::Mapped => rows.iter().map(|&i| ds.labels()[i] == 1).collect(),
        LdSource::Modeled(p) => model.score(ds, rows)?.into_iter().map(|s| s >= p).collect(),
    };
    Ok(ranked(model.features.clone(), region_deltas(&columns, &ld)?, ta))
}

pub fn write_normalized_csv(rows: &[NormalizedDelta], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::from("rank,feature,delta,normalized\n");
    for (k, r) in rows.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{}", k + 1, r.feature, r.delta, r.normalized);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub const DEFAULT_CLIMATE_FEATURES: [&str; 3] = ["Asp", "NEE", "MAP"];

#[derive(Debug, Clone)]
pub struct RatioMap {
    /// `(window, ratio)` for windows with a defined ratio.
    pub windows: Vec<((usize, usize), f64)>,
    pub raster: RasterGrid,
}

/// Per window, `|Σ_climate ΔS̄_j| / |ΔS̄_slope|` for a model whose named
/// features are all single original features.
pub fn climate_vs_slope_map(
    model: &SnnModel,
    ds: &Dataset,
    rows: &[usize],
    cfg: &WindowConfig,
    climate: &[String],
    slope: &str,
    source: LdSource,
) -> Result<RatioMap> {
    let labels = model.labels();
    let level_one = |name: &str| -> Result<usize> {
        labels
            .iter()
            .position(|l| l == name)
            .filter(|&j| model.encoder.monomials[j].level() == 1)
            .ok_or_else(|| Error::Data(format!("model has no single-feature subnet for '{name}'")))
    };
    let slope_j = level_one(slope)?;
    let climate_j = climate.iter().map(|c| level_one(c)).collect::<Result<Vec<_>>>()?;
    let map = delta_sbar_map(model, ds, rows, cfg, source)?;
    let mut raster = map.dominant.like();
    let mut windows = Vec::new();
    for r in &map.reports {
        let num: f64 = climate_j.iter().map(|&j| r.delta[j]).sum::<f64>().abs();
        let den = r.delta[slope_j].abs();
        if den == 0.0 {
            log::warn!("window {:?}: slope contribution difference is zero; ratio left as NODATA", r.window);
            continue;
        }
        let ratio = num / den;
        raster.set(r.window.0, r.window.1, ratio);
        windows.push((r.window, ratio));
    }
    Ok(RatioMap { windows, raster })
}
