use std::path::PathBuf;

use clap::Args;
use snn_core::rbf::load_model;
use snn_core::{Dataset, Result, SnnModel};

use super::{labels_of, write_evaluation, write_scores, Evaluation};
use crate::args::{CommonArgs, RowSet, SplitArgs, DEFAULT_BLOCK, DEFAULT_TRAIN_FRACTION};
use crate::config::Settings;

/// Metrics, ROC and success-rate curves of a saved model.
#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Model file written by `snn train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dataset CSV with a 0/1 `target` column.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Rows to evaluate on.
    #[arg(long, value_enum)]
    pub rows: Option<RowSet>,
    /// Decision threshold; defaults to the one stored in the model.
    #[arg(long)]
    pub threshold: Option<f64>,
}

fn meta<T: std::str::FromStr>(model: &SnnModel, key: &str, default: T) -> T {
    model
        .metadata
        .extra
        .get(key)
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

/// Loads a model and the dataset split the way the model was trained: the
/// seed, block and train fraction default to the values stored in the model.
/// Returns the resolved top-level seed as well.
pub fn load_model_and_data(
    s: &mut Settings,
    model: Option<PathBuf>,
    data: Option<PathBuf>,
    split: &SplitArgs,
    seed_flag: Option<u64>,
) -> Result<(SnnModel, Dataset, u64)> {
    let model = load_model(s.required_path("model", model)?)?;
    let seed = s.get("seed", seed_flag, meta(&model, "seed", 0))?;
    let ds = split.load_with_defaults(
        s,
        data,
        seed,
        meta(&model, "block", DEFAULT_BLOCK),
        meta(&model, "train_fraction", DEFAULT_TRAIN_FRACTION),
    )?;
    model.check_inputs(&ds)?;
    Ok((model, ds, seed))
}

pub fn run(a: &EvalArgs) -> Result<Evaluation> {
    let mut run = a.common.open("eval")?;
    let s = &mut run.settings;
    let (model, ds, _) = load_model_and_data(s, a.model.clone(), a.data.clone(), &a.split, a.common.seed)?;
    let rows = s.get("rows", a.rows, RowSet::Test)?.indices(&ds)?;
    let threshold = s.optional("threshold", a.threshold)?.or(model.threshold);
    run.ready()?;
    let scores = model.predict(&ds, &rows)?;
    write_scores(&run.path("scores.csv"), &ds, &rows, &scores)?;
    let title = if model.metadata.region.is_empty() { "SNN".to_string() } else { format!("SNN {}", model.metadata.region) };
    let ev = write_evaluation(&run.out, &title, &scores, &labels_of(&ds, &rows), threshold)?;
    println!("AUROC {:.4}, success-rate AUC {:.4} on {} rows", ev.auroc, ev.success_auc, rows.len());
    Ok(ev)
}
