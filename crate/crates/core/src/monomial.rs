//! Composite features: primitive monomials over the original features.
//!
//! A composite feature is a product `x_i^e_i * x_j^e_j * ...`. Its level is
//! the total degree. Only primitive monomials are admitted: those whose
//! exponents have gcd 1. `x1^2*x2^2` is the square of `x1*x2` and carries no
//! new information once the value is standardized, so it is excluded, while
//! `x1^2*x2` is kept.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Standardizer};
use crate::{Error, Result};

/// Upper bound on the number of generated composite features.
pub const MAX_COMPOSITES: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    /// `(feature index, exponent)` pairs sorted by feature index; exponents ≥ 1.
    factors: Vec<(usize, u32)>,
}

/// Why an exponent map is not an admissible composite feature.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Rejection {
    #[error("empty exponent map")]
    Empty,
    #[error("feature {0} has exponent 0")]
    ZeroExponent(usize),
    #[error("not primitive: equals ({root})^{power}")]
    NotPrimitive { root: Monomial, power: u32 },
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Accepts an exponent map iff it describes a primitive monomial.
pub fn canonicalize(exponents: &BTreeMap<usize, u32>) -> std::result::Result<Monomial, Rejection> {
    if exponents.is_empty() {
        return Err(Rejection::Empty);
    }
    if let Some((&i, _)) = exponents.iter().find(|(_, &e)| e == 0) {
        return Err(Rejection::ZeroExponent(i));
    }
    let g = exponents.values().fold(0, |acc, &e| gcd(acc, e));
    let factors: Vec<(usize, u32)> = exponents.iter().map(|(&i, &e)| (i, e)).collect();
    if g == 1 {
        Ok(Monomial { factors })
    } else {
        Err(Rejection::NotPrimitive {
            root: Monomial {
                factors: factors.iter().map(|&(i, e)| (i, e / g)).collect(),
            },
            power: g,
        })
    }
}

impl Monomial {
    /// The single original feature `x_index`.
    pub fn single(index: usize) -> Self {
        Monomial {
            factors: vec![(index, 1)],
        }
    }

    /// Builds from `(index, exponent)` pairs, rejecting non-primitive input.
    pub fn from_pairs(pairs: &[(usize, u32)]) -> std::result::Result<Self, Rejection> {
        let mut map = BTreeMap::new();
        for &(i, e) in pairs {
            *map.entry(i).or_insert(0) += e;
        }
        canonicalize(&map)
    }

    pub fn factors(&self) -> &[(usize, u32)] {
        &self.factors
    }

    pub fn level(&self) -> u32 {
        self.factors.iter().map(|&(_, e)| e).sum()
    }

    pub fn max_index(&self) -> usize {
        self.factors.last().map_or(0, |&(i, _)| i)
    }

    pub fn exponent_map(&self) -> BTreeMap<usize, u32> {
        self.factors.iter().copied().collect()
    }

    /// Dense exponent vector of width `n`.
    pub fn dense(&self, n: usize) -> Vec<u32> {
        let mut v = vec![0; n];
        for &(i, e) in &self.factors {
            v[i] = e;
        }
        v
    }

    /// Human-readable label such as `MAP*Slope` or `x1^2*x2`.
    pub fn label(&self, names: &[String]) -> String {
        self.factors
            .iter()
            .map(|&(i, e)| {
                let name = names.get(i).cloned().unwrap_or_else(|| format!("x{}", i + 1));
                if e == 1 {
                    name
                } else {
                    format!("{name}^{e}")
                }
            })
            .collect::<Vec<_>>()
            .join("*")
    }

    /// Product of `row[i]^e` over the factors.
    pub fn evaluate(&self, row: &[f64]) -> Result<f64> {
        if self.max_index() >= row.len() {
            return Err(Error::Data(format!(
                "monomial uses feature {} but row has {} values",
                self.max_index(),
                row.len()
            )));
        }
        Ok(self.eval_unchecked(row))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, row: &[f64]) -> f64 {
        self.factors
            .iter()
            .fold(1.0, |acc, &(i, e)| acc * row[i].powi(e as i32))
    }

    /// Canonical ordering: level ascending, then dense exponent vector
    /// descending (so `x1` precedes `x2` and `x1*x2` precedes `x1*x3`).
    pub fn canonical_cmp(&self, other: &Monomial) -> std::cmp::Ordering {
        self.level().cmp(&other.level()).then_with(|| {
            let n = self.max_index().max(other.max_index()) + 1;
            other.dense(n).cmp(&self.dense(n))
        })
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label(&[]))
    }
}

/// Model-file form of a monomial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonomialRecord {
    pub label: String,
    pub exponents: BTreeMap<usize, u32>,
}

impl MonomialRecord {
    pub fn new(m: &Monomial, names: &[String]) -> Self {
        MonomialRecord {
            label: m.label(names),
            exponents: m.exponent_map(),
        }
    }

    pub fn to_monomial(&self) -> Result<Monomial> {
        canonicalize(&self.exponents)
            .map_err(|r| Error::Model(format!("feature '{}': {r}", self.label)))
    }
}

/// Number of exponent vectors over `caps.len()` variables with total degree
/// in `1..=max_level` and `e_i <= caps[i]`, saturating.
fn bounded_count(caps: &[u32], max_level: u32) -> u128 {
    let l = max_level as usize;
    let mut ways = vec![0u128; l + 1];
    ways[0] = 1;
    for &cap in caps {
        let mut next = vec![0u128; l + 1];
        for (d, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for e in 0..=(cap as usize).min(l - d) {
                next[d + e] = next[d + e].saturating_add(w);
            }
        }
        ways = next;
    }
    ways[1..].iter().fold(0u128, |a, &w| a.saturating_add(w))
}

/// All primitive monomials over `n` features with level ≤ `max_level`, in
/// canonical order.
pub fn expand(n: usize, max_level: u32) -> Result<Vec<Monomial>> {
    expand_bounded(max_level, &vec![u32::MAX; n])
}

/// Like [`expand`] but with a per-feature exponent cap.
///
/// A 0/1-valued feature satisfies `x^k = x`, so any exponent above 1 merely
/// duplicates a lower-level monomial; pass a cap of 1 for such features
/// (see [`exponent_caps`]).
pub fn expand_bounded(max_level: u32, caps: &[u32]) -> Result<Vec<Monomial>> {
    let n = caps.len();
    if n == 0 || max_level == 0 {
        return Err(Error::Config(
            "expansion needs at least one feature and level >= 1".into(),
        ));
    }
    let total = bounded_count(caps, max_level);
    if total > MAX_COMPOSITES {
        return Err(Error::Config(format!(
            "{n} features at level {max_level} would generate over {MAX_COMPOSITES} composite features"
        )));
    }
    let mut out = Vec::new();
    let mut current = vec![0u32; n];
    for level in 1..=max_level {
        compositions(0, level, caps, &mut current, &mut out);
    }
    Ok(out)
}

/// Appends every primitive exponent vector summing to `remaining` over
/// positions `pos..`, in descending lexicographic order.
fn compositions(
    pos: usize,
    remaining: u32,
    caps: &[u32],
    current: &mut Vec<u32>,
    out: &mut Vec<Monomial>,
) {
    let n = caps.len();
    if pos == n - 1 {
        if remaining <= caps[pos] {
            current[pos] = remaining;
            let g = current.iter().fold(0, |acc, &e| gcd(acc, e));
            if g == 1 {
                out.push(Monomial {
                    factors: current
                        .iter()
                        .enumerate()
                        .filter(|(_, &e)| e > 0)
                        .map(|(i, &e)| (i, e))
                        .collect(),
                });
            }
            current[pos] = 0;
        }
        return;
    }
    let hi = remaining.min(caps[pos]);
    for e in (0..=hi).rev() {
        current[pos] = e;
        compositions(pos + 1, remaining - e, caps, current, out);
    }
    current[pos] = 0;
}

/// Exponent caps for a dataset: 1 for 0/1-valued features, unbounded otherwise.
pub fn exponent_caps(ds: &Dataset) -> Vec<u32> {
    (0..ds.n_features())
        .map(|j| if ds.is_binary_feature(j) { 1 } else { u32::MAX })
        .collect()
}

/// Evaluates every monomial on every row; returns one column per monomial.
pub fn evaluate_matrix(ms: &[Monomial], rows: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    ms.iter()
        .map(|m| rows.iter().map(|r| m.evaluate(r)).collect())
        .collect()
}

/// Whether products are taken of raw or of standardized original features.
/// Either way the resulting composite column is standardized afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompositeBasis {
    Raw,
    Standardized,
}

impl std::str::FromStr for CompositeBasis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(CompositeBasis::Raw),
            "standardized" => Ok(CompositeBasis::Standardized),
            _ => Err(Error::Config(format!(
                "composite basis must be 'raw' or 'standardized', got '{s}'"
            ))),
        }
    }
}

impl std::fmt::Display for CompositeBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CompositeBasis::Raw => "raw",
            CompositeBasis::Standardized => "standardized",
        })
    }
}

/// Maps raw feature rows to standardized composite-feature values.
#[derive(Debug, Clone)]
pub struct CompositeEncoder {
    pub basis: CompositeBasis,
    pub input_names: Vec<String>,
    pub input_scaler: Option<Standardizer>,
    pub monomials: Vec<Monomial>,
    pub scaler: Standardizer,
}

impl CompositeEncoder {
    /// Fits input (if needed) and composite standardization on `rows`.
    pub fn fit_rows(
        ds: &Dataset,
        rows: &[usize],
        monomials: Vec<Monomial>,
        basis: CompositeBasis,
    ) -> Result<Self> {
        if monomials.is_empty() {
            return Err(Error::Data("no composite features to encode".into()));
        }
        if let Some(m) = monomials.iter().find(|m| m.max_index() >= ds.n_features()) {
            return Err(Error::Data(format!(
                "composite feature {m} refers past the dataset's {} features",
                ds.n_features()
            )));
        }
        let input_scaler = match basis {
            CompositeBasis::Raw => None,
            CompositeBasis::Standardized => {
                let cols: Vec<Vec<f64>> = (0..ds.n_features()).map(|j| ds.column(j)).collect();
                let views: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
                Some(Standardizer::fit(&views, rows, ds.feature_names())?)
            }
        };
        let mut enc = CompositeEncoder {
            basis,
            input_names: ds.feature_names().to_vec(),
            input_scaler,
            monomials,
            scaler: Standardizer {
                mean: vec![],
                std: vec![],
            },
        };
        let raw = enc.raw_columns(ds);
        let views: Vec<&[f64]> = raw.iter().map(|c| c.as_slice()).collect();
        enc.scaler = Standardizer::fit(&views, rows, &enc.labels())?;
        Ok(enc)
    }

    /// Fits on the train partition.
    pub fn fit(ds: &Dataset, monomials: Vec<Monomial>, basis: CompositeBasis) -> Result<Self> {
        CompositeEncoder::fit_rows(ds, &ds.train_indices(), monomials, basis)
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.monomials.iter().map(|m| m.label(&self.input_names)).collect()
    }

    fn prepared(&self, row: &[f64]) -> Vec<f64> {
        match &self.input_scaler {
            Some(s) => s.transform_row(row),
            None => row.to_vec(),
        }
    }

    /// Composite values before composite standardization for one row.
    pub fn raw_row(&self, row: &[f64]) -> Vec<f64> {
        let p = self.prepared(row);
        self.monomials.iter().map(|m| m.eval_unchecked(&p)).collect()
    }

    /// Standardized composite values for one row.
    pub fn encode_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.input_names.len() {
            return Err(Error::Data(format!(
                "row has {} values, model expects {}",
                row.len(),
                self.input_names.len()
            )));
        }
        Ok(self
            .raw_row(row)
            .into_iter()
            .enumerate()
            .map(|(k, v)| self.scaler.apply(k, v))
            .collect())
    }

    /// Composite values before standardization, one column per monomial, all rows.
    pub fn raw_columns(&self, ds: &Dataset) -> Vec<Vec<f64>> {
        let mut cols = vec![Vec::with_capacity(ds.len()); self.monomials.len()];
        for i in 0..ds.len() {
            let p = self.prepared(ds.row(i));
            for (k, m) in self.monomials.iter().enumerate() {
                cols[k].push(m.eval_unchecked(&p));
            }
        }
        cols
    }

    /// Standardized composite columns restricted to `rows` (in that order).
    pub fn encode_columns(&self, ds: &Dataset, rows: &[usize]) -> Vec<Vec<f64>> {
        let mut cols = vec![Vec::with_capacity(rows.len()); self.monomials.len()];
        for &i in rows {
            let p = self.prepared(ds.row(i));
            for (k, m) in self.monomials.iter().enumerate() {
                cols[k].push(self.scaler.apply(k, m.eval_unchecked(&p)));
            }
        }
        cols
    }

    /// Encoder over a subset of this encoder's monomials.
    pub fn select(&self, keep: &[usize]) -> CompositeEncoder {
        CompositeEncoder {
            basis: self.basis,
            input_names: self.input_names.clone(),
            input_scaler: self.input_scaler.clone(),
            monomials: keep.iter().map(|&k| self.monomials[k].clone()).collect(),
            scaler: Standardizer {
                mean: keep.iter().map(|&k| self.scaler.mean[k]).collect(),
                std: keep.iter().map(|&k| self.scaler.std[k]).collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(ms: &[Monomial]) -> Vec<String> {
        ms.iter().map(|m| m.label(&[])).collect()
    }

    #[test]
    fn three_features_level_three() {
        let ms = expand(3, 3).unwrap();
        assert_eq!(ms.len(), 13);
        assert_eq!(
            labels(&ms),
            [
                "x1", "x2", "x3", "x1*x2", "x1*x3", "x2*x3", "x1^2*x2", "x1^2*x3", "x1*x2^2",
                "x1*x2*x3", "x1*x3^2", "x2^2*x3", "x2*x3^2"
            ]
        );
    }

    #[test]
    fn fifteen_features_level_two() {
        let ms = expand(15, 2).unwrap();
        assert_eq!(ms.len(), 120);
        assert_eq!(ms.iter().filter(|m| m.level() == 1).count(), 15);
    }

    #[test]
    fn boolean_features_level_four_matches_table() {
        let ms = expand_bounded(4, &[1; 4]).unwrap();
        assert_eq!(
            labels(&ms),
            [
                "x1", "x2", "x3", "x4", "x1*x2", "x1*x3", "x1*x4", "x2*x3", "x2*x4", "x3*x4",
                "x1*x2*x3", "x1*x2*x4", "x1*x3*x4", "x2*x3*x4", "x1*x2*x3*x4"
            ]
        );
    }

    #[test]
    fn level_one_is_identity() {
        let ms = expand(7, 1).unwrap();
        assert_eq!(ms, (0..7).map(Monomial::single).collect::<Vec<_>>());
    }

    #[test]
    fn oversized_expansion_is_config_error() {
        assert!(matches!(expand(2000, 3), Err(Error::Config(_))));
        assert!(expand(0, 2).is_err());
    }

    #[test]
    fn canonicalize_rules() {
        let m = |p: &[(usize, u32)]| p.iter().copied().collect::<BTreeMap<_, _>>();
        match canonicalize(&m(&[(0, 2), (1, 2)])) {
            Err(Rejection::NotPrimitive { root, power }) => {
                assert_eq!(root.label(&[]), "x1*x2");
                assert_eq!(power, 2);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(canonicalize(&m(&[(0, 2), (1, 1)])).unwrap().level(), 3);
        assert_eq!(canonicalize(&m(&[(0, 1)])).unwrap().level(), 1);
        assert_eq!(canonicalize(&m(&[])), Err(Rejection::Empty));
        assert!(Monomial::from_pairs(&[(2, 3)]).is_err());
    }

    #[test]
    fn evaluate_products() {
        let x1x2 = Monomial::from_pairs(&[(0, 1), (1, 1)]).unwrap();
        let x1sq_x2 = Monomial::from_pairs(&[(0, 2), (1, 1)]).unwrap();
        assert_eq!(x1x2.evaluate(&[2.0, 3.0, 7.0]).unwrap(), 6.0);
        assert_eq!(x1sq_x2.evaluate(&[2.0, 3.0]).unwrap(), 12.0);
        assert_eq!(x1sq_x2.evaluate(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(Monomial::single(3).evaluate(&[1.0]).is_err());
        let cols = evaluate_matrix(&[x1x2], &[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(cols, vec![vec![2.0, 12.0]]);
    }

    #[test]
    fn labels_use_feature_names() {
        let names = vec!["MAP".to_string(), "Slope".to_string()];
        let m = Monomial::from_pairs(&[(0, 1), (1, 1)]).unwrap();
        assert_eq!(m.label(&names), "MAP*Slope");
        let m = Monomial::from_pairs(&[(0, 1), (1, 2)]).unwrap();
        assert_eq!(m.label(&names), "MAP*Slope^2");
    }

    /// Brute force: every integer vector in [0, L]^n with 1 ≤ sum ≤ L and gcd 1.
    fn brute_force(n: usize, l: u32) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        let total = (l as usize + 1).pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let v: Vec<u32> = (0..n)
                .map(|_| {
                    let d = (c % (l as usize + 1)) as u32;
                    c /= l as usize + 1;
                    d
                })
                .collect();
            let s: u32 = v.iter().sum();
            if s >= 1 && s <= l && v.iter().fold(0, |a, &e| gcd(a, e)) == 1 {
                out.push(v);
            }
        }
        out
    }

    #[test]
    fn expansion_matches_brute_force() {
        for n in 1..=8 {
            for l in 1..=4u32 {
                if (l as usize + 1).pow(n as u32) > 400_000 {
                    continue;
                }
                let mut want = brute_force(n, l);
                let mut got: Vec<Vec<u32>> = expand(n, l).unwrap().iter().map(|m| m.dense(n)).collect();
                want.sort();
                got.sort();
                assert_eq!(got, want, "n={n} level={l}");
            }
            assert_eq!(expand(n, 2).unwrap().len(), n + n * (n - 1) / 2);
        }
    }

    #[test]
    fn expansion_is_duplicate_free_and_primitive() {
        let ms = expand(5, 4).unwrap();
        let set: std::collections::HashSet<_> = ms.iter().collect();
        assert_eq!(set.len(), ms.len());
        for a in &ms {
            for b in &ms {
                if a == b {
                    continue;
                }
                // b is never a positive-integer power of a
                let (da, db) = (a.dense(5), b.dense(5));
                let k = db.iter().zip(&da).find(|(_, &x)| x > 0).map(|(&y, &x)| y / x);
                if let Some(k) = k.filter(|&k| k > 1) {
                    assert!(da.iter().zip(&db).any(|(&x, &y)| x * k != y));
                }
            }
        }
        for w in ms.windows(2) {
            assert_eq!(w[0].canonical_cmp(&w[1]), std::cmp::Ordering::Less);
        }
    }

    #[test]
    fn encoder_standardizes_composites_on_fit_rows() {
        let rows = (0..20)
            .map(|i| vec![i as f64 * 0.5 + 1.0, (i % 5) as f64 - 2.0])
            .collect();
        let labels = (0..20).map(|i| (i % 2) as u8).collect();
        let ds = Dataset::new(vec!["a".into(), "b".into()], rows, labels, None).unwrap();
        for basis in [CompositeBasis::Raw, CompositeBasis::Standardized] {
            let enc = CompositeEncoder::fit(&ds, expand(2, 2).unwrap(), basis).unwrap();
            let cols = enc.encode_columns(&ds, &ds.train_indices());
            for c in &cols {
                let m = c.iter().sum::<f64>() / c.len() as f64;
                let v = c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / c.len() as f64;
                assert!(m.abs() < 1e-9 && (v - 1.0).abs() < 1e-9);
            }
            let row = enc.encode_row(ds.row(3)).unwrap();
            for k in 0..enc.len() {
                assert_eq!(row[k], cols[k][3]);
            }
            assert!(enc.encode_row(&[1.0]).is_err());
        }
    }

    proptest! {
        #[test]
        fn evaluation_is_multiplicative(
            row in proptest::collection::vec(-3.0f64..3.0, 6),
            ea in proptest::collection::vec(0u32..3, 3),
            eb in proptest::collection::vec(0u32..3, 3),
        ) {
            // a uses features 0..3, b uses 3..6: disjoint supports
            let pa: Vec<(usize, u32)> = ea.iter().enumerate().filter(|(_, &e)| e > 0).map(|(i, &e)| (i, e)).collect();
            let pb: Vec<(usize, u32)> = eb.iter().enumerate().filter(|(_, &e)| e > 0).map(|(i, &e)| (i + 3, e)).collect();
            prop_assume!(!pa.is_empty() && !pb.is_empty());
            let prod = |p: &[(usize, u32)]| p.iter().fold(1.0, |acc, &(i, e)| acc * row[i].powi(e as i32));
            let joint: Vec<(usize, u32)> = pa.iter().chain(pb.iter()).copied().collect();
            let want = prod(&pa) * prod(&pb);
            let got = prod(&joint);
            prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
            if let Ok(m) = Monomial::from_pairs(&joint) {
                prop_assert!((m.evaluate(&row).unwrap() - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }
}
