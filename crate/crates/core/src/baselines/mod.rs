//! Comparison models: a limit-equilibrium failure index, likelihood ratios,
//! logistic regression and a first-order-trained MLP.

pub mod fi;
pub mod logr;
pub mod lr;
pub mod mlp;

pub use fi::{failure_index, failure_index_value, wetness, wetness_value, FiParams};
pub use logr::{collinearity_screen, logr_train, CollinearityReport, LogRModel, COLLINEARITY_LIMIT};
pub use lr::{lr_feature, lr_train, LrFeature, LrModel};
pub use mlp::{minmax_categorize, mlp_baseline_train, Categorizer, MlpBaseline, MlpConfig};

use crate::{Dataset, Error, Result};

/// Linear-interpolation quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Resolves feature names to column indices; an empty list means all features.
pub fn resolve_features(ds: &Dataset, names: &[String]) -> Result<Vec<usize>> {
    if names.is_empty() {
        return Ok((0..ds.n_features()).collect());
    }
    names
        .iter()
        .map(|n| {
            ds.feature_index(n)
                .ok_or_else(|| Error::Data(format!("feature '{n}' is not in the dataset")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let s = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.0), 0.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert_eq!(quantile_sorted(&s, 0.5), 2.0);
        assert!((quantile_sorted(&s, 0.1) - 0.4).abs() < 1e-15);
    }
}
