//! Seeded generators: the four-input toy model, additive ground-truth
//! datasets, and a small raster scene for end-to-end demos.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::monomial::{expand_bounded, Monomial};
use crate::raster::RasterGrid;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub n_samples: usize,
    /// Standard deviation of Gaussian noise added to the inputs after the
    /// target is computed.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        ToySpec {
            n_samples: 1000,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

/// Default input noise for the noisy toy run.
pub const TOY_NOISE_SIGMA: f64 = 0.1;

/// `y = x1·x2 + x3·x4 − 2·x1·x2·x3·x4` on Boolean inputs.
pub fn toy_target(x: &[f64; 4]) -> f64 {
    x[0] * x[1] + x[2] * x[3] - 2.0 * x[0] * x[1] * x[2] * x[3]
}

pub fn toy_names() -> Vec<String> {
    (1..=4).map(|i| format!("x{i}")).collect()
}

/// All 16 Boolean input rows in binary counting order.
pub fn toy_truth_table() -> Vec<[f64; 4]> {
    (0..16u32)
        .map(|m| std::array::from_fn(|k| ((m >> (3 - k)) & 1) as f64))
        .collect()
}

/// The 15 candidate composites for the toy: every product of distinct inputs.
pub fn toy_candidates() -> Vec<Monomial> {
    expand_bounded(4, &[1; 4]).expect("small fixed expansion")
}

pub fn gen_toy(spec: &ToySpec) -> Result<Dataset> {
    if spec.n_samples < 16 {
        return Err(Error::Config("toy data needs at least 16 samples".into()));
    }
    if !(spec.noise_sigma >= 0.0) {
        return Err(Error::Config("toy noise sigma must be non-negative".into()));
    }
    let mut rng = seed::rng(spec.seed);
    // Separate stream so the clean inputs and labels do not depend on sigma.
    let mut noise_rng = seed::rng(seed::derive(spec.seed, 1));
    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut rows = Vec::with_capacity(spec.n_samples);
    let mut labels = Vec::with_capacity(spec.n_samples);
    for _ in 0..spec.n_samples {
        let x: [f64; 4] = std::array::from_fn(|_| rng.random_range(0..2u8) as f64);
        labels.push(toy_target(&x) as u8);
        let row: Vec<f64> = if spec.noise_sigma > 0.0 {
            x.iter().map(|v| v + noise.sample(&mut noise_rng)).collect()
        } else {
            x.to_vec()
        };
        rows.push(row);
    }
    Dataset::new(toy_names(), rows, labels, None)
}

/// One-dimensional ground-truth shapes on the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GroundTruth {
    Zero,
    Linear { slope: f64 },
    /// `scale / (1 + exp(−steepness·(x − center)))`
    Sigmoid { scale: f64, center: f64, steepness: f64 },
    /// `height·exp(−((x − center)/width)²)`
    Bump { height: f64, center: f64, width: f64 },
    /// `scale·sin(2π·cycles·x)`
    Sine { scale: f64, cycles: f64 },
    /// `scale·(x − center)²`
    Quadratic { scale: f64, center: f64 },
}

impl GroundTruth {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            GroundTruth::Zero => 0.0,
            GroundTruth::Linear { slope } => slope * x,
            GroundTruth::Sigmoid { scale, center, steepness } => {
                scale / (1.0 + (-steepness * (x - center)).exp())
            }
            GroundTruth::Bump { height, center, width } => {
                let u = (x - center) / width;
                height * (-u * u).exp()
            }
            GroundTruth::Sine { scale, cycles } => scale * (std::f64::consts::TAU * cycles * x).sin(),
            GroundTruth::Quadratic { scale, center } => scale * (x - center).powi(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LabelThreshold {
    /// Cut at the given score.
    Value(f64),
    /// Cut at the given quantile of the generated scores.
    Quantile(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveSpec {
    pub n_samples: usize,
    pub functions: Vec<GroundTruth>,
    pub threshold: LabelThreshold,
    pub seed: u64,
}

/// Dataset plus the generating functions and exact scores.
#[derive(Debug, Clone)]
pub struct AdditiveOracle {
    pub functions: Vec<GroundTruth>,
    pub scores: Vec<f64>,
    pub threshold: f64,
}

impl AdditiveOracle {
    pub fn score(&self, row: &[f64]) -> f64 {
        self.functions.iter().zip(row).map(|(g, &x)| g.eval(x)).sum()
    }
}

/// Uniform inputs on `[0, 1]`, score `Σ g_i(x_i)`, label `score > threshold`.
pub fn gen_additive(spec: &AdditiveSpec) -> Result<(Dataset, AdditiveOracle)> {
    if spec.functions.is_empty() {
        return Err(Error::Config("additive generator needs at least one function".into()));
    }
    let mut rng = seed::rng(spec.seed);
    let m = spec.functions.len();
    let rows: Vec<Vec<f64>> = (0..spec.n_samples)
        .map(|_| (0..m).map(|_| rng.random::<f64>()).collect())
        .collect();
    let scores: Vec<f64> = rows
        .iter()
        .map(|r| spec.functions.iter().zip(r).map(|(g, &x)| g.eval(x)).sum())
        .collect();
    let threshold = match spec.threshold {
        LabelThreshold::Value(t) => t,
        LabelThreshold::Quantile(q) => {
            let mut s = scores.clone();
            s.sort_by(f64::total_cmp);
            let k = ((q.clamp(0.0, 1.0) * (s.len() as f64 - 1.0)).round() as usize).min(s.len().saturating_sub(1));
            s.get(k).copied().unwrap_or(0.0)
        }
    };
    let labels: Vec<u8> = scores.iter().map(|&s| (s > threshold) as u8).collect();
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::Data(format!(
            "single class: threshold {threshold} leaves {pos} of {} samples positive",
            labels.len()
        )));
    }
    let names = (1..=m).map(|i| format!("x{i}")).collect();
    let ds = Dataset::new(names, rows, labels, None)?;
    Ok((
        ds,
        AdditiveOracle {
            functions: spec.functions.clone(),
            scores,
            threshold,
        },
    ))
}

/// Ten mixed shapes of unequal strength; the steep sigmoid on x1 dominates.
pub fn mixed_functions(m: usize) -> Vec<GroundTruth> {
    let palette = [
        GroundTruth::Sigmoid { scale: 1.5, center: 0.5, steepness: 10.0 },
        GroundTruth::Linear { slope: 1.0 },
        GroundTruth::Bump { height: 1.0, center: 0.4, width: 0.2 },
        GroundTruth::Sine { scale: 0.6, cycles: 1.0 },
        GroundTruth::Quadratic { scale: 2.0, center: 0.5 },
        GroundTruth::Sigmoid { scale: -1.0, center: 0.3, steepness: 15.0 },
        GroundTruth::Linear { slope: -0.5 },
        GroundTruth::Bump { height: -0.8, center: 0.7, width: 0.15 },
        GroundTruth::Linear { slope: 0.3 },
        GroundTruth::Zero,
    ];
    (0..m).map(|k| palette[k % palette.len()]).collect()
}

/// Ten shapes whose outputs each span about 1 on the unit interval, apart
/// from a weak linear term and a null feature. No single feature dominates,
/// so a Level-2 tournament has no reason to favour products of one feature.
pub fn balanced_functions(m: usize) -> Vec<GroundTruth> {
    let palette = [
        GroundTruth::Sigmoid { scale: 1.0, center: 0.5, steepness: 10.0 },
        GroundTruth::Linear { slope: 1.0 },
        GroundTruth::Bump { height: 1.0, center: 0.4, width: 0.2 },
        GroundTruth::Sine { scale: 0.5, cycles: 1.0 },
        GroundTruth::Quadratic { scale: 4.0, center: 0.5 },
        GroundTruth::Sigmoid { scale: -1.0, center: 0.3, steepness: 15.0 },
        GroundTruth::Linear { slope: -1.0 },
        GroundTruth::Bump { height: -1.0, center: 0.7, width: 0.15 },
        GroundTruth::Linear { slope: 0.5 },
        GroundTruth::Zero,
    ];
    (0..m).map(|k| palette[k % palette.len()]).collect()
}

/// A synthetic raster scene: smooth covariate fields, a landslide inventory
/// drawn from a known additive propensity, and the matching dataset.
#[derive(Debug, Clone)]
pub struct RasterScene {
    /// `(feature name, grid)` in dataset column order.
    pub features: Vec<(String, RasterGrid)>,
    /// Upslope drainage area (m²) for the failure-index baseline.
    pub drainage_area: RasterGrid,
    /// Storm precipitation (m/s) for the failure-index baseline.
    pub storm_precip: RasterGrid,
    /// 1 = landslide, 0 = stable.
    pub inventory: RasterGrid,
    pub dataset: Dataset,
}

/// Sum of a few random plane waves, rescaled to `[lo, hi]`.
fn smooth_field(nrows: usize, ncols: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Vec<f64> {
    let waves: Vec<(f64, f64, f64, f64)> = (0..5)
        .map(|_| {
            (
                rng.random_range(0.5..3.0) / nrows.max(ncols) as f64,
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.3..1.0),
            )
        })
        .collect();
    let mut v: Vec<f64> = (0..nrows * ncols)
        .map(|i| {
            let (r, c) = ((i / ncols) as f64, (i % ncols) as f64);
            waves
                .iter()
                .map(|&(f, dir, ph, amp)| {
                    amp * (std::f64::consts::TAU * f * (r * dir.cos() + c * dir.sin()) + ph).sin()
                })
                .sum()
        })
        .collect();
    let (mn, mx) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    for x in &mut v {
        *x = lo + (*x - mn) / (mx - mn) * (hi - lo);
    }
    v
}

/// Builds a `nrows × ncols` scene at `cellsize` metres. Labels are Bernoulli
/// draws from a logistic propensity in slope, precipitation and aspect.
pub fn gen_raster_scene(nrows: usize, ncols: usize, cellsize: f64, seed: u64) -> Result<RasterScene> {
    if nrows < 10 || ncols < 10 {
        return Err(Error::Config("raster scene needs at least 10×10 cells".into()));
    }
    let mut rng = seed::rng(seed);
    let grid = |values: Vec<f64>| RasterGrid {
        values,
        ..RasterGrid::new(nrows, ncols, cellsize)
    };
    let slope = smooth_field(nrows, ncols, 0.05, 1.4, &mut rng);
    let map = smooth_field(nrows, ncols, 800.0, 3200.0, &mut rng);
    let aspect = smooth_field(nrows, ncols, 0.0, 360.0, &mut rng);
    let nee = smooth_field(nrows, ncols, -2.0, 2.0, &mut rng);
    let log_area = smooth_field(nrows, ncols, 2.5, 5.5, &mut rng);
    let area: Vec<f64> = log_area.iter().map(|v| 10f64.powf(*v)).collect();
    let storm: Vec<f64> = map.iter().map(|m| m / 1000.0 * 2e-7).collect();

    let n = nrows * ncols;
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let z = -3.6
            + 2.5 * (3.0 * (slope[i] - 0.6)).tanh()
            + 1.0 * (map[i] - 2000.0) / 800.0
            + 0.6 * (aspect[i].to_radians() - 2.4).cos()
            + 0.4 * (log_area[i] - 4.0);
        let p = 1.0 / (1.0 + (-z).exp());
        labels.push((rng.random::<f64>() < p) as u8);
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == n {
        return Err(Error::Data("raster scene produced a single class; try another seed".into()));
    }
    let names = ["Slope", "MAP", "Asp", "NEE", "LogArea"];
    let cols = [&slope, &map, &aspect, &nee, &log_area];
    let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    let pos_rc: Vec<(i64, i64)> = (0..n).map(|i| ((i / ncols) as i64, (i % ncols) as i64)).collect();
    let dataset = Dataset::new(names.iter().map(|s| s.to_string()).collect(), rows, labels.clone(), Some(pos_rc))?;
    Ok(RasterScene {
        features: names
            .iter()
            .zip(cols)
            .map(|(nm, c)| (nm.to_string(), grid(c.clone())))
            .collect(),
        drainage_area: grid(area),
        storm_precip: grid(storm),
        inventory: grid(labels.iter().map(|&l| l as f64).collect()),
        dataset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::auroc;

    #[test]
    fn truth_table_examples() {
        assert_eq!(toy_target(&[0.0, 0.0, 1.0, 1.0]), 1.0);
        assert_eq!(toy_target(&[1.0, 1.0, 1.0, 1.0]), 0.0);
        assert_eq!(toy_target(&[1.0, 1.0, 0.0, 0.0]), 1.0);
        for x in toy_truth_table() {
            let b = |k: usize| x[k] == 1.0;
            let expected = ((b(0) && b(1)) ^ (b(2) && b(3))) as u8 as f64;
            assert_eq!(toy_target(&x), expected, "{x:?}");
        }
        assert_eq!(toy_candidates().len(), 15);
    }

    #[test]
    fn toy_generation_is_reproducible_and_balanced() {
        let spec = ToySpec { seed: 9, ..ToySpec::default() };
        let a = gen_toy(&spec).unwrap();
        let b = gen_toy(&spec).unwrap();
        assert_eq!(a.labels(), b.labels());
        for j in 0..4 {
            assert_eq!(a.column(j), b.column(j));
            let ones: f64 = a.column(j).iter().sum();
            // 3σ of Binomial(1000, 0.5) is about 47.
            assert!((ones - 500.0).abs() <= 3.0 * (250f64).sqrt(), "{ones}");
        }
        assert!(a.labels().iter().all(|&l| l <= 1));
        let noisy = gen_toy(&ToySpec { noise_sigma: 0.1, ..spec }).unwrap();
        assert_eq!(noisy.labels(), a.labels());
        assert!(noisy.column(0) != a.column(0));
    }

    #[test]
    fn additive_examples() {
        let zero = AdditiveSpec {
            n_samples: 100,
            functions: vec![GroundTruth::Zero; 3],
            threshold: LabelThreshold::Value(0.0),
            seed: 1,
        };
        assert!(gen_additive(&zero).unwrap_err().to_string().contains("single class"));
        let sat = AdditiveSpec {
            n_samples: 5000,
            functions: vec![GroundTruth::Sigmoid { scale: 1.0, center: 0.5, steepness: 8.0 }],
            threshold: LabelThreshold::Quantile(0.5),
            seed: 2,
        };
        let (ds, oracle) = gen_additive(&sat).unwrap();
        let prev = ds.labels().iter().filter(|&&l| l == 1).count() as f64 / 5000.0;
        assert!((prev - 0.5).abs() <= 0.02);
        assert_eq!(auroc(&oracle.scores, ds.labels()).unwrap(), 1.0);
        assert_eq!(oracle.score(ds.row(7)), oracle.scores[7]);
    }

    #[test]
    fn raster_scene_is_consistent() {
        let s = gen_raster_scene(40, 30, 30.0, 5).unwrap();
        assert_eq!(s.dataset.len(), 1200);
        assert_eq!(s.features.len(), s.dataset.n_features());
        let (r, c) = s.dataset.grid_pos().unwrap()[45];
        assert_eq!(s.features[0].1.get(r as usize, c as usize), s.dataset.value(45, 0));
        let pos = s.dataset.labels().iter().filter(|&&l| l == 1).count();
        assert!(pos > 10 && pos < 600, "{pos}");
    }

    #[test]
    fn balanced_shapes_have_comparable_spans() {
        let grid: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
        let spans: Vec<f64> = balanced_functions(10)
            .iter()
            .map(|g| {
                let v: Vec<f64> = grid.iter().map(|&x| g.eval(x)).collect();
                v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
            })
            .collect();
        for s in &spans[..8] {
            assert!((0.95..=1.0 + 1e-9).contains(s), "{spans:?}");
        }
        assert!((spans[8] - 0.5).abs() < 1e-12 && spans[9] == 0.0);
    }
}
