//! Tournament ranking of candidate composite features and forward selection.
//!
//! Candidates are put in canonical order, then each of `n_groups` seeded
//! groups of `group_size` candidates is played out independently:
//!
//! 1. an additive group net is fitted on the fit rows (class-weighted LM);
//! 2. backward elimination repeatedly refits without each member and drops
//!    the one whose removal costs the least validation AUROC, as long as that
//!    cost is within `elimination_tol`;
//! 3. the point goes to the last survivor, or, when several members are each
//!    indispensable, to the survivor whose term has the widest central
//!    (p0.5 to p99.5) output range over the validation rows.
//!
//! Validation rows are a stratified holdout of the train partition; the test
//! partition is never touched.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::additive::AdditiveNet;
use crate::dataset::{sample_weights, Dataset};
use crate::lm::LmConfig;
use crate::metrics::auroc;
use crate::monomial::{CompositeBasis, CompositeEncoder, Monomial, MonomialRecord};
use crate::rbf::init_for_inputs;
use crate::baselines::quantile_sorted;
use crate::teacher::stratified_cap;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentConfig {
    pub group_size: usize,
    pub n_groups: usize,
    pub neurons_per_feature: usize,
    /// Optimizer settings for the initial group fit.
    pub lm: LmConfig,
    /// Epoch budget for the warm-started refits during elimination.
    pub refit_epochs: usize,
    /// Largest validation-AUROC loss at which a member may still be dropped.
    pub elimination_tol: f64,
    /// Smallest validation-AUROC gain that keeps a feature in forward selection.
    pub forward_tol: f64,
    /// Consecutive rejections that end forward selection.
    pub patience: usize,
    pub forward_neurons: usize,
    pub forward_epochs: usize,
    /// Fraction of the train partition held out for validation AUROC.
    pub holdout: f64,
    /// Per-group cap on fit + validation rows (stratified subsample).
    pub max_rows: Option<usize>,
    pub basis: CompositeBasis,
    pub seed: u64,
}

impl Default for TournamentConfig {
    fn default() -> Self {
        TournamentConfig {
            group_size: 8,
            n_groups: 2000,
            neurons_per_feature: 2,
            lm: LmConfig::default().with_epochs(50),
            refit_epochs: 15,
            elimination_tol: 0.002,
            forward_tol: 0.002,
            patience: 3,
            forward_neurons: 4,
            forward_epochs: 50,
            holdout: 0.25,
            max_rows: Some(2000),
            basis: CompositeBasis::Raw,
            seed: 0,
        }
    }
}

impl TournamentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::Config("tournament group size must be at least 2".into()));
        }
        if self.n_groups == 0 {
            return Err(Error::Config("tournament needs at least one group".into()));
        }
        if !(self.forward_tol >= 0.0) || !(self.elimination_tol >= 0.0) {
            return Err(Error::Config("tournament tolerances must be non-negative".into()));
        }
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return Err(Error::Config(format!("holdout fraction {} outside (0, 1)", self.holdout)));
        }
        if self.neurons_per_feature == 0 || self.forward_neurons == 0 {
            return Err(Error::Config("tournament nets need at least one neuron per feature".into()));
        }
        if self.max_rows.is_some_and(|m| m < 8) {
            return Err(Error::Config("tournament max_rows must be at least 8".into()));
        }
        self.lm.validate()
    }
}

/// Encoded candidate columns and the fit/validation split shared by all groups.
pub struct TournamentData {
    pub candidates: Vec<Monomial>,
    pub labels: Vec<String>,
    /// `columns[k][i]`: standardized candidate `k` at dataset row `i`.
    columns: Vec<Vec<f64>>,
    targets: Vec<u8>,
    pub fit_rows: Vec<usize>,
    pub val_rows: Vec<usize>,
}

impl TournamentData {
    /// Canonicalizes `candidates`, encodes them on the train partition and
    /// draws the validation holdout.
    pub fn prepare(candidates: &[Monomial], ds: &Dataset, cfg: &TournamentConfig) -> Result<Self> {
        cfg.validate()?;
        if candidates.is_empty() {
            return Err(Error::Data("no candidate features".into()));
        }
        let mut cands = candidates.to_vec();
        cands.sort_by(|a, b| a.canonical_cmp(b));
        if cands.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Data("duplicate candidate features".into()));
        }
        let train = ds.train_indices();
        sample_weights(ds.labels(), &train)?;
        let encoder = CompositeEncoder::fit(ds, cands.clone(), cfg.basis)?;
        let all: Vec<usize> = (0..ds.len()).collect();
        let columns = encoder.encode_columns(ds, &all);
        let n_val = ((train.len() as f64) * cfg.holdout).round() as usize;
        let val_rows = stratified_cap(&train, ds.labels(), n_val, seed::derive(cfg.seed, 0x7a1d));
        let fit_rows: Vec<usize> = train.iter().copied().filter(|i| val_rows.binary_search(i).is_err()).collect();
        sample_weights(ds.labels(), &fit_rows)
            .map_err(|e| Error::Data(format!("tournament fit rows: {e}")))?;
        sample_weights(ds.labels(), &val_rows)
            .map_err(|e| Error::Data(format!("tournament validation rows: {e}")))?;
        Ok(TournamentData {
            labels: encoder.labels(),
            candidates: cands,
            columns,
            targets: ds.labels().to_vec(),
            fit_rows,
            val_rows,
        })
    }

    fn gather(&self, members: &[usize], rows: &[usize]) -> Vec<Vec<f64>> {
        members
            .iter()
            .map(|&k| rows.iter().map(|&i| self.columns[k][i]).collect())
            .collect()
    }

    fn row_labels(&self, rows: &[usize]) -> Vec<u8> {
        rows.iter().map(|&i| self.targets[i]).collect()
    }
}

/// Rows and columns for one group or selection model.
struct Arena {
    fit: Vec<Vec<f64>>,
    val: Vec<Vec<f64>>,
    y: Vec<f64>,
    w: Vec<f64>,
    val_labels: Vec<u8>,
}

impl Arena {
    fn new(data: &TournamentData, members: &[usize], fit_rows: &[usize], val_rows: &[usize]) -> Result<Self> {
        let w = sample_weights(&data.targets, fit_rows)?;
        Ok(Arena {
            fit: data.gather(members, fit_rows),
            val: data.gather(members, val_rows),
            y: fit_rows.iter().map(|&i| data.targets[i] as f64).collect(),
            w,
            val_labels: data.row_labels(val_rows),
        })
    }

    fn views<'a>(cols: &'a [Vec<f64>], active: &[usize]) -> Vec<&'a [f64]> {
        active.iter().map(|&k| cols[k].as_slice()).collect()
    }

    fn val_auroc(&self, net: &AdditiveNet, active: &[usize]) -> Result<f64> {
        auroc(&net.predict(&Self::views(&self.val, active)), &self.val_labels)
    }
}

/// Plays one group: returns the candidate index that earns the point.
///
/// `members` are candidate indices; ties in elimination cost drop the
/// member with the higher index.
pub fn backwards_eliminate(
    data: &TournamentData,
    members: &[usize],
    cfg: &TournamentConfig,
    group_seed: u64,
) -> Result<usize> {
    match members {
        [] => return Err(Error::Data("empty tournament group".into())),
        [only] => return Ok(*only),
        _ => {}
    }
    let mut members = members.to_vec();
    members.sort_unstable();
    let (fit_rows, val_rows) = match cfg.max_rows {
        Some(cap) => {
            let n_val = ((cap as f64) * cfg.holdout).round().max(4.0) as usize;
            (
                stratified_cap(&data.fit_rows, &data.targets, cap - n_val, seed::derive(group_seed, 1)),
                stratified_cap(&data.val_rows, &data.targets, n_val, seed::derive(group_seed, 2)),
            )
        }
        None => (data.fit_rows.clone(), data.val_rows.clone()),
    };
    let arena = Arena::new(data, &members, &fit_rows, &val_rows)?;
    let mut active: Vec<usize> = (0..members.len()).collect();
    let mut net = AdditiveNet::init(
        &Arena::views(&arena.fit, &active),
        &arena.y,
        &arena.w,
        cfg.neurons_per_feature,
        seed::derive(group_seed, 3),
    )?;
    net.fit(&Arena::views(&arena.fit, &active), &arena.y, &arena.w, &cfg.lm)?;
    let mut current = arena.val_auroc(&net, &active)?;
    let refit = LmConfig {
        max_epochs: cfg.refit_epochs,
        ..cfg.lm.clone()
    };

    while active.len() > 1 {
        let mut best: Option<(f64, usize, AdditiveNet, f64)> = None;
        for pos in 0..active.len() {
            let mut reduced = net.without(pos);
            let rest: Vec<usize> = active.iter().copied().filter(|&k| k != active[pos]).collect();
            reduced.fit(&Arena::views(&arena.fit, &rest), &arena.y, &arena.w, &refit)?;
            let a = arena.val_auroc(&reduced, &rest)?;
            let cost = current - a;
            // `<=` with ascending positions: ties drop the higher index.
            if best.as_ref().is_none_or(|b| cost <= b.0) {
                best = Some((cost, pos, reduced, a));
            }
        }
        let (cost, pos, reduced, a) = best.expect("at least two active members");
        if cost > cfg.elimination_tol {
            break;
        }
        active.remove(pos);
        net = reduced;
        current = a;
    }

    if active.len() == 1 {
        return Ok(members[active[0]]);
    }
    let mut winner = 0;
    let mut widest = f64::NEG_INFINITY;
    for (pos, &k) in active.iter().enumerate() {
        let s = central_range(net.term_outputs(pos, &arena.val[k]));
        if s > widest {
            widest = s;
            winner = pos;
        }
    }
    Ok(members[active[winner]])
}

/// Spread of a term's output between its 0.5% and 99.5% quantiles; unlike a
/// standard deviation it does not shrink for rarely active terms.
fn central_range(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.995) - quantile_sorted(&v, 0.005)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    /// Candidates in canonical order.
    pub candidates: Vec<Monomial>,
    pub labels: Vec<String>,
    /// Points per candidate, parallel to `candidates`.
    pub points: Vec<u64>,
    /// Candidate indices by (points desc, level asc, label asc).
    pub order: Vec<usize>,
    pub failed_groups: usize,
}

impl Ranking {
    pub fn from_points(candidates: Vec<Monomial>, labels: Vec<String>, points: Vec<u64>, failed_groups: usize) -> Self {
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&i, &j| {
            points[j]
                .cmp(&points[i])
                .then(candidates[i].level().cmp(&candidates[j].level()))
                .then(labels[i].cmp(&labels[j]))
        });
        Ranking {
            candidates,
            labels,
            points,
            order,
            failed_groups,
        }
    }

    pub fn ranked_labels(&self) -> Vec<&str> {
        self.order.iter().map(|&k| self.labels[k].as_str()).collect()
    }

    pub fn ranked(&self) -> Vec<Monomial> {
        self.order.iter().map(|&k| self.candidates[k].clone()).collect()
    }

    pub fn total_points(&self) -> u64 {
        self.points.iter().sum()
    }
}

/// Seeded group membership: `group_size` distinct candidate indices.
pub fn group_members(n_candidates: usize, group_size: usize, group_seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(group_seed);
    let mut m = sample(&mut rng, n_candidates, group_size.min(n_candidates)).into_vec();
    m.sort_unstable();
    m
}

pub fn run_tournament(data: &TournamentData, cfg: &TournamentConfig) -> Result<Ranking> {
    cfg.validate()?;
    let n = data.candidates.len();
    if n < cfg.group_size {
        return Err(Error::Config(format!(
            "{n} candidates cannot fill groups of {}",
            cfg.group_size
        )));
    }
    let outcomes: Vec<Result<usize>> = (0..cfg.n_groups as u64)
        .into_par_iter()
        .map(|g| {
            let gs = seed::derive(cfg.seed, g);
            let members = group_members(n, cfg.group_size, gs);
            backwards_eliminate(data, &members, cfg, gs)
        })
        .collect();
    let mut points = vec![0u64; n];
    let mut failed = 0;
    for (g, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(k) => points[k] += 1,
            Err(e) => {
                log::warn!("tournament group {g} failed: {e}");
                failed += 1;
            }
        }
    }
    if failed * 10 > cfg.n_groups {
        return Err(Error::Numerical(format!(
            "{failed} of {} tournament groups failed",
            cfg.n_groups
        )));
    }
    Ok(Ranking::from_points(data.candidates.clone(), data.labels.clone(), points, failed))
}

/// Walks the ranking and keeps features that raise validation AUROC by more
/// than `forward_tol`. The top-ranked feature is always kept.
pub fn forward_select(ranking: &Ranking, data: &TournamentData, cfg: &TournamentConfig) -> Result<Vec<Monomial>> {
    if ranking.order.is_empty() {
        return Err(Error::Data("empty ranking".into()));
    }
    if ranking.candidates != data.candidates {
        return Err(Error::Data("ranking and tournament data disagree on candidates".into()));
    }
    let order = &ranking.order;
    let arena = Arena::new(data, order, &data.fit_rows, &data.val_rows)?;
    let lm = LmConfig {
        max_epochs: cfg.forward_epochs,
        ..cfg.lm.clone()
    };
    let fseed = seed::derive(cfg.seed, 0xf0f0);
    let mut active = vec![0usize];
    let mut net = AdditiveNet::init(
        &Arena::views(&arena.fit, &active),
        &arena.y,
        &arena.w,
        cfg.forward_neurons,
        fseed,
    )?;
    net.fit(&Arena::views(&arena.fit, &active), &arena.y, &arena.w, &lm)?;
    let mut current = arena.val_auroc(&net, &active)?;
    let mut misses = 0;
    for pos in 1..order.len() {
        if misses >= cfg.patience || !cfg.forward_tol.is_finite() {
            break;
        }
        let term = match init_for_inputs(cfg.forward_neurons, &arena.fit[pos], seed::derive(fseed, pos as u64)) {
            Ok(t) => t,
            Err(_) => {
                misses += 1;
                continue;
            }
        };
        let mut trial_net = net.with_term(term);
        let mut trial = active.clone();
        trial.push(pos);
        trial_net.fit(&Arena::views(&arena.fit, &trial), &arena.y, &arena.w, &lm)?;
        let a = arena.val_auroc(&trial_net, &trial)?;
        log::debug!("forward selection: {} gives {a:.4} (from {current:.4})", data.labels[order[pos]]);
        if a - current > cfg.forward_tol {
            active = trial;
            net = trial_net;
            current = a;
            misses = 0;
        } else {
            misses += 1;
        }
    }
    Ok(active.iter().map(|&p| data.candidates[order[p]].clone()).collect())
}

/// `label,level,points,rank,exponents` with rank starting at 1.
pub fn write_ranking_csv(ranking: &Ranking, names: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::from("label,level,points,rank,exponents\n");
    for (r, &k) in ranking.order.iter().enumerate() {
        let m = &ranking.candidates[k];
        let exps: Vec<String> = MonomialRecord::new(m, names)
            .exponents
            .iter()
            .map(|(i, e)| format!("{i}:{e}"))
            .collect();
        let _ = writeln!(s, "{},{},{},{},{}", ranking.labels[k], m.level(), ranking.points[k], r + 1, exps.join(" "));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn informative_plus_noise(n: usize, seed: u64) -> Dataset {
        let mut rng = crate::seed::rng(seed);
        let names: Vec<String> = (0..8).map(|i| format!("f{i}")).collect();
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels = rows.iter().map(|r| (r[0] > 0.2) as u8).collect();
        Dataset::new(names, rows, labels, None).unwrap()
    }

    fn singles(n: usize) -> Vec<Monomial> {
        (0..n).map(Monomial::single).collect()
    }

    fn small_cfg() -> TournamentConfig {
        TournamentConfig {
            group_size: 4,
            n_groups: 40,
            lm: LmConfig::default().with_epochs(20),
            refit_epochs: 8,
            max_rows: Some(300),
            ..TournamentConfig::default()
        }
    }

    #[test]
    fn informative_feature_wins_its_groups() {
        let ds = informative_plus_noise(600, 1);
        let cfg = small_cfg();
        let data = TournamentData::prepare(&singles(8), &ds, &cfg).unwrap();
        let r = run_tournament(&data, &cfg).unwrap();
        assert_eq!(r.total_points(), 40);
        let with_f0 = (0..40u64)
            .filter(|&g| group_members(8, 4, seed::derive(cfg.seed, g)).contains(&0))
            .count() as f64;
        assert!(r.points[0] as f64 >= 0.6 * with_f0, "{:?}", r.points);
        assert_eq!(r.ranked_labels()[0], "f0");
        let sel = forward_select(&r, &data, &cfg).unwrap();
        assert_eq!(sel[0], Monomial::single(0));
        assert_eq!(sel.len(), 1, "{sel:?}");
        let again = run_tournament(&data, &cfg).unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn singleton_group_needs_no_training() {
        let ds = informative_plus_noise(100, 2);
        let cfg = small_cfg();
        let data = TournamentData::prepare(&singles(8), &ds, &cfg).unwrap();
        assert_eq!(backwards_eliminate(&data, &[5], &cfg, 0).unwrap(), 5);
    }

    #[test]
    fn pair_with_noise_keeps_informative() {
        let ds = informative_plus_noise(400, 3);
        let cfg = small_cfg();
        let data = TournamentData::prepare(&singles(8), &ds, &cfg).unwrap();
        for s in 0..5 {
            assert_eq!(backwards_eliminate(&data, &[0, 3], &cfg, s).unwrap(), 0);
        }
    }

    #[test]
    fn infinite_tolerance_selects_one() {
        let ds = informative_plus_noise(300, 4);
        let cfg = TournamentConfig {
            forward_tol: f64::INFINITY,
            ..small_cfg()
        };
        let data = TournamentData::prepare(&singles(8), &ds, &cfg).unwrap();
        let r = Ranking::from_points(data.candidates.clone(), data.labels.clone(), vec![1; 8], 0);
        assert_eq!(forward_select(&r, &data, &cfg).unwrap().len(), 1);
    }

    #[test]
    fn membership_ignores_candidate_permutation() {
        let ds = informative_plus_noise(200, 5);
        let cfg = small_cfg();
        let mut shuffled = singles(8);
        shuffled.reverse();
        let a = TournamentData::prepare(&singles(8), &ds, &cfg).unwrap();
        let b = TournamentData::prepare(&shuffled, &ds, &cfg).unwrap();
        assert_eq!(a.candidates, b.candidates);
        assert!(cfg.validate().is_ok());
        assert!(TournamentConfig { group_size: 1, ..cfg }.validate().is_err());
    }

    #[test]
    fn ranking_order_breaks_ties_by_level_then_label() {
        let c = vec![Monomial::single(0), Monomial::single(1), Monomial::from_pairs(&[(0, 1), (1, 1)]).unwrap()];
        let l = vec!["b".to_string(), "a".to_string(), "a*b".to_string()];
        let r = Ranking::from_points(c, l, vec![2, 2, 5], 0);
        assert_eq!(r.ranked_labels(), vec!["a*b", "a", "b"]);
    }
}
