//! ROC analysis, success-rate curves, thresholds, confusion metrics and
//! cross-validated AUROC intervals.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{cv_subsample, Dataset};
use crate::{Error, Result};

/// ROC curve with one point per distinct score. Point 0 is `(0, 0)` at
/// threshold `+∞`; the last point is `(1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auroc: f64,
}

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    (pos, labels.len() - pos)
}

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Data(format!("score {i} is not finite")));
    }
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::Data(format!(
            "single-class labels ({pos} positive, {neg} negative)"
        )));
    }
    Ok((pos, neg))
}

/// Indices sorted by descending score; equal scores stay adjacent.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
    order
}

/// Sweeps distinct scores from high to low, yielding
/// `(score, positives so far, negatives so far)` after each tie group.
fn sweep(scores: &[f64], labels: &[u8]) -> Vec<(f64, usize, usize)> {
    let order = descending(scores);
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        out.push((s, tp, fp));
    }
    out
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[1] + y[0]) / 2.0)
        .sum()
}

pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let steps = sweep(scores, labels);
    let mut thresholds = Vec::with_capacity(steps.len() + 1);
    let mut fpr = Vec::with_capacity(steps.len() + 1);
    let mut tpr = Vec::with_capacity(steps.len() + 1);
    thresholds.push(f64::INFINITY);
    fpr.push(0.0);
    tpr.push(0.0);
    for (s, tp, fp) in steps {
        thresholds.push(s);
        fpr.push(fp as f64 / neg as f64);
        tpr.push(tp as f64 / pos as f64);
    }
    let auroc = trapezoid(&fpr, &tpr).clamp(0.0, 1.0);
    Ok(RocCurve {
        thresholds,
        fpr,
        tpr,
        auroc,
    })
}

pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    Ok(roc_curve(scores, labels)?.auroc)
}

/// AUROC on a subset of rows.
pub fn auroc_rows(scores: &[f64], labels: &[u8], rows: &[usize]) -> Result<f64> {
    let s: Vec<f64> = rows.iter().map(|&i| scores[i]).collect();
    let l: Vec<u8> = rows.iter().map(|&i| labels[i]).collect();
    auroc(&s, &l)
}

/// Success-rate curve: fraction of samples flagged (x) against fraction of
/// positives captured (y) as the threshold is lowered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessCurve {
    pub flagged: Vec<f64>,
    pub captured: Vec<f64>,
    pub auc: f64,
}

pub fn success_rate_curve(scores: &[f64], labels: &[u8]) -> Result<SuccessCurve> {
    let (pos, _) = check_inputs(scores, labels)?;
    let n = scores.len() as f64;
    let mut flagged = vec![0.0];
    let mut captured = vec![0.0];
    for (_, tp, fp) in sweep(scores, labels) {
        flagged.push((tp + fp) as f64 / n);
        captured.push(tp as f64 / pos as f64);
    }
    let auc = trapezoid(&flagged, &captured);
    Ok(SuccessCurve {
        flagged,
        captured,
        auc,
    })
}

pub fn success_rate_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    Ok(success_rate_curve(scores, labels)?.auc)
}

/// Distance of each ROC point to the perfect corner `(0, 1)`.
pub fn corner_distance(fpr: f64, tpr: f64) -> f64 {
    (fpr * fpr + (1.0 - tpr) * (1.0 - tpr)).sqrt()
}

/// Index of the ROC point closest to `(0, 1)`; ties go to the higher threshold.
pub fn optimal_point(roc: &RocCurve) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for k in 0..roc.fpr.len() {
        let d = corner_distance(roc.fpr[k], roc.tpr[k]);
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}

/// Threshold at the point closest to `(0, 1)`.
///
/// The chosen point flags every score `>= s_k`. The returned cut is the
/// midpoint between `s_k` and the next lower distinct score, so the same
/// samples are flagged by `score >= threshold` and the cut sits strictly
/// between the two classes for a perfect separator. At the last point the
/// cut is `s_k` itself; at the `+∞` point it lies one unit above the top score.
pub fn optimal_threshold(roc: &RocCurve) -> f64 {
    let k = optimal_point(roc);
    let t = &roc.thresholds;
    if k == 0 {
        return t.get(1).map_or(0.0, |top| top + 1.0);
    }
    match t.get(k + 1) {
        Some(&lower) => (t[k] + lower) / 2.0,
        None => t[k],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
    pub accuracy: f64,
    pub pod: f64,
    pub pofd: f64,
    pub pod_minus_pofd: f64,
    pub threshold: f64,
}

/// Counts with `score >= threshold` predicted positive.
pub fn confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionMetrics> {
    if !threshold.is_finite() {
        return Err(Error::Data(format!("threshold {threshold} is not finite")));
    }
    check_inputs(scores, labels).map_err(|e| match e {
        Error::Data(m) if m.starts_with("single-class") => {
            Error::Data(format!("confusion metrics undefined: {m}"))
        }
        e => e,
    })?;
    let (mut tp, mut fn_, mut fp, mut tn) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => tp += 1,
            (false, true) => fn_ += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    let pod = tp as f64 / (tp + fn_) as f64;
    let pofd = fp as f64 / (fp + tn) as f64;
    Ok(ConfusionMetrics {
        tp,
        fn_,
        fp,
        tn,
        accuracy: (tp + tn) as f64 / scores.len() as f64,
        pod,
        pofd,
        pod_minus_pofd: pod - pofd,
        threshold,
    })
}

/// Spread of test AUROC over repeated half-sample trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub aurocs: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    /// `mean ± 1.96·std/√n` (normal approximation).
    pub ci95: (f64, f64),
    /// `mean ± 2·std`.
    pub two_sigma: (f64, f64),
}

pub fn summarize_aurocs(aurocs: Vec<f64>) -> Result<CvSummary> {
    let n = aurocs.len();
    if n < 2 {
        return Err(Error::Config("cross-validation needs at least 2 trials".into()));
    }
    let mean = aurocs.iter().sum::<f64>() / n as f64;
    let var = aurocs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    let half = 1.96 * std / (n as f64).sqrt();
    Ok(CvSummary {
        aurocs,
        mean,
        std,
        ci95: (mean - half, mean + half),
        two_sigma: (mean - 2.0 * std, mean + 2.0 * std),
    })
}

/// Runs `trials` half-sample trials. `train_eval(train_rows, test_rows, trial)`
/// retrains and returns the test AUROC. Trials run concurrently.
pub fn cv_auroc_ci<F>(train_eval: F, ds: &Dataset, trials: usize, seed: u64) -> Result<CvSummary>
where
    F: Fn(&[usize], &[usize], u64) -> Result<f64> + Sync,
{
    if trials < 2 {
        return Err(Error::Config("cross-validation needs at least 2 trials".into()));
    }
    let results: Vec<Result<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let (train, test) = cv_subsample(ds, t, seed)?;
            train_eval(&train, &test, t)
        })
        .collect();
    let mut aurocs = Vec::with_capacity(trials);
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(a) => aurocs.push(a),
            Err(e) => return Err(Error::Data(format!("cross-validation trial {t} failed: {e}"))),
        }
    }
    summarize_aurocs(aurocs)
}

pub fn write_roc_csv(roc: &RocCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::from("threshold,fpr,tpr\n");
    for k in 0..roc.fpr.len() {
        let _ = writeln!(s, "{},{},{}", roc.thresholds[k], roc.fpr[k], roc.tpr[k]);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    /// `P(s_pos > s_neg) + ½·P(tie)` over every positive/negative pair.
    fn pairwise_auroc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] == 1 && labels[j] == 0 {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    fn random_case(seed: u64, n: usize, levels: u32) -> (Vec<f64>, Vec<u8>) {
        let mut rng = crate::seed::rng(seed);
        let labels: Vec<u8> = (0..n).map(|i| if i < 2 { i as u8 } else { rng.random_range(0..2) }).collect();
        let scores = (0..n).map(|_| rng.random_range(0..levels) as f64 / 7.0).collect();
        (scores, labels)
    }

    #[test]
    fn auroc_examples() {
        let labels = [0, 1, 1, 0, 1];
        let perfect: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
        assert_eq!(auroc(&perfect, &labels).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3; 5], &labels).unwrap(), 0.5);
        assert!(auroc(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn auroc_matches_pairwise_oracle() {
        for (seed, levels) in [(1, 1000), (2, 5), (3, 2)] {
            let (s, l) = random_case(seed, 200, levels);
            let a = auroc(&s, &l).unwrap();
            assert!((a - pairwise_auroc(&s, &l)).abs() < 1e-9);
        }
    }

    #[test]
    fn curve_endpoints() {
        let (s, l) = random_case(4, 50, 10);
        let roc = roc_curve(&s, &l).unwrap();
        assert_eq!((roc.fpr[0], roc.tpr[0]), (0.0, 0.0));
        assert_eq!((*roc.fpr.last().unwrap(), *roc.tpr.last().unwrap()), (1.0, 1.0));
        assert!(roc.thresholds.windows(2).all(|w| w[0] > w[1]));
    }

    proptest! {
        #[test]
        fn monotone_transform_and_negation(seed in 0u64..500) {
            let (s, l) = random_case(seed, 60, 20);
            let a = auroc(&s, &l).unwrap();
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 2.0).collect();
            prop_assert!((auroc(&t, &l).unwrap() - a).abs() < 1e-12);
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            prop_assert!((auroc(&neg, &l).unwrap() + a - 1.0).abs() < 1e-12);
        }

        #[test]
        fn optimal_point_is_exhaustive_minimum(seed in 0u64..300) {
            let (s, l) = random_case(seed, 40, 12);
            let roc = roc_curve(&s, &l).unwrap();
            let k = optimal_point(&roc);
            let d = corner_distance(roc.fpr[k], roc.tpr[k]);
            for j in 0..roc.fpr.len() {
                let dj = corner_distance(roc.fpr[j], roc.tpr[j]);
                prop_assert!(d <= dj);
                if dj == d { prop_assert!(j >= k); }
            }
            let t = optimal_threshold(&roc);
            let c = confusion(&s, &l, t).unwrap();
            prop_assert!((c.pofd - roc.fpr[k]).abs() < 1e-12);
            prop_assert!((c.pod - roc.tpr[k]).abs() < 1e-12);
            prop_assert_eq!(c.tp + c.fn_, l.iter().filter(|&&x| x == 1).count());
        }
    }

    #[test]
    fn threshold_examples() {
        let roc = roc_curve(&[0.9, 0.8, 0.3, 0.1], &[1, 1, 0, 0]).unwrap();
        let t = optimal_threshold(&roc);
        assert!(t > 0.3 && t < 0.8);
        assert_eq!(corner_distance(roc.fpr[optimal_point(&roc)], roc.tpr[optimal_point(&roc)]), 0.0);
        // Symmetric: scores {0, 1} on each class once.
        let roc = roc_curve(&[1.0, 0.0, 1.0, 0.0], &[1, 1, 0, 0]).unwrap();
        assert_eq!(optimal_threshold(&roc), 0.5);
    }

    #[test]
    fn confusion_examples() {
        let labels = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
        let scores = [0.9, 0.8, 0.1, 0.7, 0.2, 0.2, 0.1, 0.0, 0.3, 0.1];
        let c = confusion(&scores, &labels, 0.5).unwrap();
        assert_eq!((c.tp, c.fn_, c.fp, c.tn), (2, 1, 1, 6));
        assert!((c.accuracy - 0.8).abs() < 1e-15);
        assert!((c.pod - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.pofd - 1.0 / 7.0).abs() < 1e-15);
        let all = confusion(&scores, &labels, -1.0).unwrap();
        assert_eq!((all.pod, all.pofd, all.pod_minus_pofd), (1.0, 1.0, 0.0));
        let right: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
        let c = confusion(&right, &labels, 0.5).unwrap();
        assert_eq!((c.accuracy, c.pod, c.pofd), (1.0, 1.0, 0.0));
        assert!(confusion(&scores, &labels, f64::NAN).is_err());
    }

    #[test]
    fn success_rate_examples() {
        let n = 10_000;
        let labels: Vec<u8> = (0..n).map(|i| (i < 100) as u8).collect();
        let perfect: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
        let c = success_rate_curve(&perfect, &labels).unwrap();
        assert!(c.auc >= 0.99);
        assert_eq!(c.captured[1], 1.0);
        assert!((c.flagged[1] - 0.01).abs() < 1e-15);
        let mut rng = crate::seed::rng(8);
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let random: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        assert!((success_rate_auc(&random, &labels).unwrap() - 0.5).abs() < 0.05);
    }

    #[test]
    fn cv_summary() {
        let s = summarize_aurocs(vec![0.8; 10]).unwrap();
        assert!(s.ci95.1 - s.ci95.0 < 1e-12);
        assert!(summarize_aurocs(vec![0.8]).is_err());
        let s = summarize_aurocs(vec![0.7, 0.9]).unwrap();
        let std = (0.02f64).sqrt();
        assert!((s.std - std).abs() < 1e-12);
        assert!((s.ci95.1 - (0.8 + 1.96 * std / 2f64.sqrt())).abs() < 1e-12);
        assert!((s.two_sigma.0 - (0.8 - 2.0 * std)).abs() < 1e-12);
    }
}
