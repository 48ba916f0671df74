pub mod baseline;
pub mod demo;
pub mod eval;
pub mod explain;
pub mod expand;
pub mod rank;
pub mod toy;
pub mod train;

use std::fmt::Write as _;
use std::path::Path;

use snn_core::metrics::{confusion, roc_curve, success_rate_curve, write_roc_csv, RocCurve};
use snn_core::{Dataset, Error, Result};

use crate::svg::{line_chart, Series};

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Headline numbers of one evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub auroc: f64,
    pub success_auc: f64,
    pub threshold: f64,
}

/// Writes metrics.csv, roc.csv, success.csv and their SVG plots into `dir`.
pub fn write_evaluation(
    dir: &Path,
    title: &str,
    scores: &[f64],
    labels: &[u8],
    threshold: Option<f64>,
) -> Result<Evaluation> {
    let roc = roc_curve(scores, labels)?;
    let success = success_rate_curve(scores, labels)?;
    let threshold = threshold.unwrap_or_else(|| snn_core::metrics::optimal_threshold(&roc));
    let cm = confusion(scores, labels, threshold)?;
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let mut s = String::from("metric,value\n");
    let rows: [(&str, String); 13] = [
        ("rows", scores.len().to_string()),
        ("positives", positives.to_string()),
        ("auroc", roc.auroc.to_string()),
        ("success_auc", success.auc.to_string()),
        ("threshold", threshold.to_string()),
        ("tp", cm.tp.to_string()),
        ("fn", cm.fn_.to_string()),
        ("fp", cm.fp.to_string()),
        ("tn", cm.tn.to_string()),
        ("accuracy", cm.accuracy.to_string()),
        ("pod", cm.pod.to_string()),
        ("pofd", cm.pofd.to_string()),
        ("pod_minus_pofd", cm.pod_minus_pofd.to_string()),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "{k},{v}");
    }
    write_file(&dir.join("metrics.csv"), &s)?;
    write_roc_csv(&roc, dir.join("roc.csv"))?;
    let mut sc = String::from("flagged,captured\n");
    for (f, c) in success.flagged.iter().zip(&success.captured) {
        let _ = writeln!(sc, "{f},{c}");
    }
    write_file(&dir.join("success.csv"), &sc)?;
    write_file(&dir.join("roc.svg"), &roc_svg(title, &roc))?;
    let curve = Series::line(&format!("AUC {:.3}", success.auc), success.flagged.clone(), success.captured.clone());
    let chance = Series::line("", vec![0.0, 1.0], vec![0.0, 1.0]).dashed();
    write_file(
        &dir.join("success.svg"),
        &line_chart(&format!("{title}: success rate"), "fraction of area flagged", "fraction of landslides captured", &[curve, chance]),
    )?;
    Ok(Evaluation {
        auroc: roc.auroc,
        success_auc: success.auc,
        threshold,
    })
}

fn roc_svg(title: &str, roc: &RocCurve) -> String {
    let curve = Series::line(&format!("AUROC {:.3}", roc.auroc), roc.fpr.clone(), roc.tpr.clone());
    let chance = Series::line("", vec![0.0, 1.0], vec![0.0, 1.0]).dashed();
    line_chart(&format!("{title}: ROC"), "POFD", "POD", &[curve, chance])
}

/// Per-row scores with the row index, label and partition.
pub fn write_scores(path: &Path, ds: &Dataset, rows: &[usize], scores: &[f64]) -> Result<()> {
    let mut s = String::from("index,target,partition,score\n");
    let part = ds.partition();
    for (&i, v) in rows.iter().zip(scores) {
        let tag = match part[i] {
            snn_core::Partition::Train => "train",
            snn_core::Partition::Test => "test",
        };
        let _ = writeln!(s, "{i},{},{tag},{v}", ds.labels()[i]);
    }
    write_file(path, &s)
}

/// File-name-safe form of a composite label such as `x1^2*x2`.
pub fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| match c {
            '*' => '_',
            '^' => 'p',
            c if c.is_ascii_alphanumeric() || c == '-' || c == '_' => c,
            _ => '-',
        })
        .collect()
}

pub fn labels_of(ds: &Dataset, rows: &[usize]) -> Vec<u8> {
    rows.iter().map(|&i| ds.labels()[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitized_labels_are_distinct_file_names() {
        assert_eq!(sanitize("x1^2*x2"), "x1p2_x2");
        assert_eq!(sanitize("Slope*MAP"), "Slope_MAP");
        assert_ne!(sanitize("a*b"), sanitize("a^b"));
    }
}
