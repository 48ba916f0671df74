use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Subcommand};
use snn_core::baselines::{
    collinearity_screen, failure_index, logr_train, lr_train, mlp_baseline_train, wetness, FiParams, MlpConfig,
};
use snn_core::metrics::{optimal_threshold, roc_curve};
use snn_core::raster::{read_ascii_grid, write_ascii_grid};
use snn_core::{seed, Dataset, Error, Result};

use super::{labels_of, write_evaluation, write_file, write_scores, Evaluation};
use crate::args::{split_list, CommonArgs, RowSet, Run, SplitArgs};

#[derive(Debug, Clone, Subcommand)]
pub enum BaselineKind {
    /// Limit-equilibrium failure index from slope, precipitation and area rasters.
    Fi(FiArgs),
    /// Summed per-bin likelihood ratios.
    Lr(LrArgs),
    /// Logistic regression after a collinearity screen.
    Logr(TabularArgs),
    /// Two-hidden-layer ReLU network on decile-categorized inputs.
    Mlp(MlpArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct FiArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Slope gradient raster (tan of the slope angle).
    #[arg(long)]
    pub slope: Option<PathBuf>,
    /// Storm precipitation raster, m/s.
    #[arg(long)]
    pub precip: Option<PathBuf>,
    /// Upslope drainage area raster, m².
    #[arg(long)]
    pub area: Option<PathBuf>,
    /// Landslide inventory raster (1 = landslide) for evaluation.
    #[arg(long)]
    pub inventory: Option<PathBuf>,
    #[arg(long)]
    pub threshold_slope: Option<f64>,
    /// Saturated transmissivity, m²/s.
    #[arg(long)]
    pub transmissivity: Option<f64>,
    #[arg(long)]
    pub water_density: Option<f64>,
    #[arg(long)]
    pub soil_density: Option<f64>,
    /// Contour length in metres; defaults to the cell size.
    #[arg(long)]
    pub contour_length: Option<f64>,
    /// Failure-index value counted as unstable in the confusion metrics.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TabularArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset CSV with a 0/1 `target` column.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Comma-separated feature names; all features when absent.
    #[arg(long)]
    pub features: Option<String>,
    /// Rows to evaluate on.
    #[arg(long, value_enum)]
    pub rows: Option<RowSet>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct LrArgs {
    #[command(flatten)]
    pub tabular: TabularArgs,
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MlpArgs {
    #[command(flatten)]
    pub tabular: TabularArgs,
    /// Comma-separated hidden layer widths.
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
}

pub fn run(kind: &BaselineKind) -> Result<Evaluation> {
    match kind {
        BaselineKind::Fi(a) => run_fi(a),
        BaselineKind::Lr(a) => run_lr(a),
        BaselineKind::Logr(a) => run_logr(a),
        BaselineKind::Mlp(a) => run_mlp(a),
    }
}

fn run_fi(a: &FiArgs) -> Result<Evaluation> {
    let mut run = a.common.open("baseline-fi")?;
    let s = &mut run.settings;
    let slope = read_ascii_grid(s.required_path("slope", a.slope.clone())?)?;
    let precip = read_ascii_grid(s.required_path("precip", a.precip.clone())?)?;
    let area = read_ascii_grid(s.required_path("area", a.area.clone())?)?;
    let inventory = s.path("inventory", a.inventory.clone())?.map(read_ascii_grid).transpose()?;
    let d = FiParams::default();
    let p = FiParams {
        threshold_slope: s.get("threshold-slope", a.threshold_slope, d.threshold_slope)?,
        transmissivity: s.get("transmissivity", a.transmissivity, d.transmissivity)?,
        water_density: s.get("water-density", a.water_density, d.water_density)?,
        soil_density: s.get("soil-density", a.soil_density, d.soil_density)?,
        contour_length: s.optional("contour-length", a.contour_length)?,
    };
    let threshold = s.get("threshold", a.threshold, 1.0)?;
    run.ready()?;

    let wet = wetness(&precip, &area, &slope, &p)?;
    let fi = failure_index(&slope, &wet, &p)?;
    write_ascii_grid(&wet, run.path("wetness.asc"))?;
    write_ascii_grid(&fi, run.path("fi.asc"))?;
    let Some(inv) = inventory else {
        println!("failure index written; no inventory given, so no metrics");
        return Ok(Evaluation {
            auroc: f64::NAN,
            success_auc: f64::NAN,
            threshold,
        });
    };
    if !inv.aligned_with(&fi) {
        return Err(Error::Data("inventory raster is not aligned with the slope raster".into()));
    }
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    let mut csv = String::from("row,col,target,score\n");
    for r in 0..fi.nrows {
        for c in 0..fi.ncols {
            let (v, l) = (fi.get(r, c), inv.get(r, c));
            if fi.is_nodata(v) || inv.is_nodata(l) {
                continue;
            }
            let l = (l == 1.0) as u8;
            let _ = writeln!(csv, "{r},{c},{l},{v}");
            scores.push(v);
            labels.push(l);
        }
    }
    write_file(&run.path("scores.csv"), &csv)?;
    let ev = write_evaluation(&run.out, "FI", &scores, &labels, Some(threshold))?;
    println!("FI: AUROC {:.4} on {} cells", ev.auroc, scores.len());
    Ok(ev)
}

struct Tabular {
    run: Run,
    ds: Dataset,
    features: Vec<String>,
    rows: Vec<usize>,
}

impl TabularArgs {
    fn open(&self, name: &str) -> Result<Tabular> {
        let mut run = self.common.open(name)?;
        let seed = run.seed;
        let s = &mut run.settings;
        let ds = self.split.load(s, self.data.clone(), seed)?;
        let features = s.optional("features", self.features.clone())?.map_or_else(Vec::new, |f| split_list(&f));
        let rows = s.get("rows", self.rows, RowSet::Test)?.indices(&ds)?;
        Ok(Tabular { run, ds, features, rows })
    }
}

impl Tabular {
    /// Scores `rows`, with the decision threshold taken from the train rows.
    fn finish(&self, title: &str, score: impl Fn(&[usize]) -> Result<Vec<f64>>) -> Result<Evaluation> {
        let train = self.ds.train_indices();
        let train_roc = roc_curve(&score(&train)?, &labels_of(&self.ds, &train))?;
        let scores = score(&self.rows)?;
        write_scores(&self.run.path("scores.csv"), &self.ds, &self.rows, &scores)?;
        let ev = write_evaluation(
            &self.run.out,
            title,
            &scores,
            &labels_of(&self.ds, &self.rows),
            Some(optimal_threshold(&train_roc)),
        )?;
        println!("{title}: AUROC {:.4} on {} rows", ev.auroc, self.rows.len());
        Ok(ev)
    }
}

fn run_lr(a: &LrArgs) -> Result<Evaluation> {
    let mut t = a.tabular.open("baseline-lr")?;
    let bins = t.run.settings.get("bins", a.bins, 10)?;
    t.run.ready()?;
    let model = lr_train(&t.ds, &t.features, &t.ds.train_indices(), bins)?;
    model.save(t.run.path("lr_model.json"))?;
    t.finish("LR", |rows| model.score_rows(&t.ds, rows))
}

fn run_logr(a: &TabularArgs) -> Result<Evaluation> {
    let t = a.open("baseline-logr")?;
    t.run.ready()?;
    let train = t.ds.train_indices();
    let report = collinearity_screen(&t.ds, &t.features, &train)?;
    let mut csv = String::from("feature_a,feature_b,r\n");
    for (i, a) in report.names.iter().enumerate() {
        for (j, b) in report.names.iter().enumerate().skip(i + 1) {
            let _ = writeln!(csv, "{a},{b},{}", report.r[i][j]);
        }
    }
    write_file(&t.run.path("collinearity.csv"), &csv)?;
    let model = logr_train(&t.ds, &t.features, &train)?;
    if model.capped {
        log::warn!("logistic coefficients hit the norm cap; the classes look separable");
    }
    model.save(t.run.path("logr_model.json"))?;
    t.finish("LogR", |rows| model.score(&t.ds, rows))
}

fn run_mlp(a: &MlpArgs) -> Result<Evaluation> {
    let mut t = a.tabular.open("baseline-mlp")?;
    let d = MlpConfig::default();
    let seed = t.run.seed;
    let s = &mut t.run.settings;
    let hidden_raw = s.get(
        "hidden",
        a.hidden.clone(),
        d.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
    )?;
    let hidden = split_list(&hidden_raw)
        .iter()
        .map(|h| h.parse().map_err(|_| Error::Config(format!("hidden width '{h}' is not a number"))))
        .collect::<Result<Vec<usize>>>()?;
    let cfg = MlpConfig {
        hidden,
        batch: s.get("batch", a.batch, d.batch)?,
        learning_rate: s.get("learning-rate", a.learning_rate, d.learning_rate)?,
        max_epochs: s.get("max-epochs", a.max_epochs, d.max_epochs)?,
        patience: s.get("patience", a.patience, d.patience)?,
        seed: seed::derive_str(seed, "mlp"),
        ..d
    };
    t.run.ready()?;
    let model = mlp_baseline_train(&t.ds, &t.features, &t.ds.train_indices(), &cfg)?;
    let mut csv = String::from("epoch,learning_rate,batches,train_loss,val_loss\n");
    for e in &model.history {
        let _ = writeln!(csv, "{},{},{},{},{}", e.epoch, e.learning_rate, e.batches, e.train_loss, e.val_loss);
    }
    write_file(&t.run.path("mlp_history.csv"), &csv)?;
    t.finish("MLP", |rows| model.score(&t.ds, rows))
}
