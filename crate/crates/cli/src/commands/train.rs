use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use snn_core::dataset::Partition;
use snn_core::distill::write_trace_csv;
use snn_core::metrics::{auroc, cv_auroc_ci};
use snn_core::pipeline::{distill_model, train_snn, PipelineConfig};
use snn_core::rbf::save_model;
use snn_core::teacher::save_teacher;
use snn_core::{seed, Dataset, Monomial, Result};

use super::rank::write_rank_output;
use super::{labels_of, write_file};
use crate::args::{CommonArgs, SplitArgs, TrainArgs};

/// Tournament, teacher, fractional and parallel distillation, superposition.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainCmdArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset CSV with a 0/1 `target` column.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Repeated half-sample retrains of the selected model; 0 skips them.
    #[arg(long)]
    pub cv_trials: Option<usize>,
}

pub struct Trained {
    pub test_auroc: f64,
}

/// Test AUROC spread of the distilled model over half-sample trials. The
/// feature selection is held fixed; everything after it is retrained.
fn cross_validate(ds: &Dataset, selection: &[Monomial], cfg: &PipelineConfig, trials: usize) -> Result<String> {
    let summary = cv_auroc_ci(
        |train, test, trial| {
            let mut tags = vec![Partition::Test; ds.len()];
            for &i in train {
                tags[i] = Partition::Train;
            }
            let mut trial_ds = ds.clone();
            trial_ds.set_partition(tags)?;
            let trial_cfg = cfg.clone().with_seed(seed::derive(cfg.seed, trial + 1));
            let out = distill_model(&trial_ds, selection, &trial_cfg)?;
            auroc(&out.model.predict(ds, test)?, &labels_of(ds, test))
        },
        ds,
        trials,
        seed::derive_str(cfg.seed, "cv"),
    )?;
    let mut s = String::from("trial,auroc\n");
    for (t, a) in summary.aurocs.iter().enumerate() {
        let _ = writeln!(s, "{t},{a}");
    }
    let _ = writeln!(s, "mean,{}", summary.mean);
    let _ = writeln!(s, "std,{}", summary.std);
    let _ = writeln!(s, "ci95_low,{}", summary.ci95.0);
    let _ = writeln!(s, "ci95_high,{}", summary.ci95.1);
    println!(
        "cv: mean AUROC {:.4}, 95% CI [{:.4}, {:.4}]",
        summary.mean, summary.ci95.0, summary.ci95.1
    );
    Ok(s)
}

pub fn run(a: &TrainCmdArgs) -> Result<Trained> {
    let mut run = a.common.open("train")?;
    let seed = run.seed;
    let s = &mut run.settings;
    let ds = a.split.load(s, a.data.clone(), seed)?;
    let block = s.get("block", a.split.block, crate::args::DEFAULT_BLOCK)?;
    let fraction = s.get("train-fraction", a.split.train_fraction, crate::args::DEFAULT_TRAIN_FRACTION)?;
    let cfg = a.train.pipeline(s, seed)?;
    let trials = s.get("cv-trials", a.cv_trials, 0)?;
    run.ready()?;

    let (ranked, mut trained) = train_snn(&ds, &cfg)?;
    write_rank_output(&run.out, &ds, &ranked)?;
    let extra = &mut trained.model.metadata.extra;
    extra.insert("block".into(), block.to_string());
    extra.insert("train_fraction".into(), fraction.to_string());
    save_model(&trained.model, run.path("model.json"))?;
    save_teacher(&trained.teacher, run.path("teacher.json"))?;
    write_trace_csv(&trained.fractional.trace, run.path("distill_trace.csv"))?;

    let test = ds.test_indices();
    let test_auroc = auroc(&trained.model.predict(&ds, &test)?, &labels_of(&ds, &test))?;
    println!(
        "model: {} subnets ({}), test AUROC {:.4}",
        trained.model.subnets.len(),
        trained.model.labels().join(", "),
        test_auroc
    );
    if trials > 0 {
        let table = cross_validate(&ds, &ranked.selection, &cfg, trials)?;
        write_file(&run.path("cv.csv"), &table)?;
    }
    Ok(Trained { test_auroc })
}
