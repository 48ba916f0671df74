use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use snn_core::baselines::LogRModel;
use snn_core::explain::{
    climate_vs_slope_map, contribution_curve, delta_sbar_map, normalized_deltas_logr, normalized_deltas_snn,
    write_curve_csv, write_legend, write_normalized_csv, write_overlay_csv, write_window_csv, LdSource,
    NormalizedDelta, WindowConfig, DEFAULT_CLIMATE_FEATURES, DEFAULT_CURVE_SAMPLES,
};
use snn_core::raster::write_ascii_grid;
use snn_core::{Dataset, Error, Result, SnnModel};

use super::eval::load_model_and_data;
use super::{sanitize, write_file};
use crate::args::{create_dir, split_list, CommonArgs, RowSet, SplitArgs};
use crate::svg::{bar_chart, line_chart, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    /// Cells the model flags at its threshold.
    Modeled,
    /// Cells labelled 1 in the data.
    Mapped,
    Both,
}

impl std::fmt::Display for SourceArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SourceArg::Modeled => "modeled",
            SourceArg::Mapped => "mapped",
            SourceArg::Both => "both",
        })
    }
}

impl std::str::FromStr for SourceArg {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        <SourceArg as ValueEnum>::from_str(s, false)
            .map_err(|_| Error::Config(format!("ld-source must be modeled, mapped or both, got '{s}'")))
    }
}

/// Contribution curves, window ΔS̄ maps and normalized contribution ranks.
#[derive(Debug, Clone, Default, Args)]
pub struct ExplainArgs {
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
    /// Rows the analyses run on.
    #[arg(long, value_enum)]
    pub rows: Option<RowSet>,
    /// Points per contribution curve.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Window side in cells.
    #[arg(long)]
    pub window_cells: Option<usize>,
    /// Ground size of one cell.
    #[arg(long)]
    pub cell_size: Option<f64>,
    /// Which cells count as landslides.
    #[arg(long, value_enum)]
    pub ld_source: Option<SourceArg>,
    /// SNN threshold for modeled landslides; defaults to the model's.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Comma-separated climate features for the climate/slope ratio map.
    #[arg(long)]
    pub climate: Option<String>,
    /// Slope feature for the climate/slope ratio map.
    #[arg(long)]
    pub slope: Option<String>,
    /// Logistic-regression model to rank alongside the SNN.
    #[arg(long)]
    pub logr: Option<PathBuf>,
    /// Probability threshold of the logistic model.
    #[arg(long)]
    pub logr_threshold: Option<f64>,
}

/// Writes one CSV, LR overlay CSV and SVG per subnet into `dir`, plus an index.
pub fn write_curves(dir: &Path, model: &SnnModel, ds: &Dataset, rows: &[usize], samples: usize) -> Result<()> {
    create_dir(dir)?;
    let mut index = String::from("feature,file,lr_one_level\n");
    for label in model.labels() {
        let curve = match contribution_curve(model, &label, ds, rows, samples) {
            Ok(c) => c,
            Err(Error::Data(msg)) => {
                log::warn!("no curve for '{label}': {msg}");
                continue;
            }
            Err(e) => return Err(e),
        };
        let stem = sanitize(&label);
        write_curve_csv(&curve, dir.join(format!("{stem}.csv")))?;
        write_overlay_csv(&curve, dir.join(format!("{stem}_lr.csv")))?;
        let mut series = vec![Series::line(&label, curve.x.clone(), curve.values.clone())];
        if let Some(level) = curve.lr_one_level {
            let (a, b) = (curve.x[0], curve.x[curve.x.len() - 1]);
            series.push(Series::line("LR = 1", vec![a, b], vec![level, level]).dashed());
        }
        write_file(
            &dir.join(format!("{stem}.svg")),
            &line_chart(&format!("Contribution of {label}"), &label, "subnet output", &series),
        )?;
        let level = curve.lr_one_level.map_or(String::new(), |v| v.to_string());
        let _ = writeln!(index, "{label},{stem}.csv,{level}");
    }
    write_file(&dir.join("index.csv"), &index)
}

fn write_ranked(dir: &Path, stem: &str, title: &str, rows: &[NormalizedDelta]) -> Result<()> {
    write_normalized_csv(rows, dir.join(format!("{stem}.csv")))?;
    let bars: Vec<(String, f64)> = rows.iter().map(|r| (r.feature.clone(), r.normalized)).collect();
    write_file(&dir.join(format!("{stem}.svg")), &bar_chart(title, "normalized ΔS̄", &bars))
}

pub fn run(a: &ExplainArgs) -> Result<()> {
    let mut run = a.common.open("explain")?;
    let s = &mut run.settings;
    let (model, ds, _) = load_model_and_data(s, a.model.clone(), a.data.clone(), &a.split, a.common.seed)?;
    let rows = s.get("rows", a.rows, RowSet::All)?.indices(&ds)?;
    let samples = s.get("samples", a.samples, DEFAULT_CURVE_SAMPLES)?;
    let wd = WindowConfig::default();
    let window = WindowConfig {
        window_cells: s.get("window-cells", a.window_cells, wd.window_cells)?,
        cell_size: s.get("cell-size", a.cell_size, wd.cell_size)?,
    };
    let which = s.get("ld-source", a.ld_source, SourceArg::Both)?;
    let threshold = s.optional("threshold", a.threshold)?.or(model.threshold);
    let climate = split_list(&s.get("climate", a.climate.clone(), DEFAULT_CLIMATE_FEATURES.join(","))?);
    let slope = s.get("slope", a.slope.clone(), "Slope".to_string())?;
    let logr = s.path("logr", a.logr.clone())?.map(LogRModel::load).transpose()?;
    let logr_threshold = s.get("logr-threshold", a.logr_threshold, 0.5)?;
    run.ready()?;

    write_curves(&run.path("curves"), &model, &ds, &rows, samples)?;

    let mut sources = Vec::new();
    if matches!(which, SourceArg::Modeled | SourceArg::Both) {
        let t = threshold.ok_or_else(|| {
            Error::Config("modeled landslides need --threshold (the model stores none)".into())
        })?;
        sources.push(("modeled", LdSource::Modeled(t)));
    }
    if matches!(which, SourceArg::Mapped | SourceArg::Both) {
        sources.push(("mapped", LdSource::Mapped));
    }
    let labels = model.labels();
    let ratio_ready = labels.contains(&slope) && climate.iter().all(|c| labels.contains(c));
    if ds.grid_pos().is_some() {
        write_legend(&labels, run.path("legend.csv"))?;
    } else {
        log::warn!("dataset has no row/col columns; window maps skipped");
    }
    for (name, source) in &sources {
        if ds.grid_pos().is_some() {
            let map = delta_sbar_map(&model, &ds, &rows, &window, *source)?;
            write_window_csv(&map, run.path(&format!("windows_{name}.csv")))?;
            write_ascii_grid(&map.dominant, run.path(&format!("dominant_{name}.asc")))?;
            if ratio_ready {
                let ratio = climate_vs_slope_map(&model, &ds, &rows, &window, &climate, &slope, *source)?;
                write_ascii_grid(&ratio.raster, run.path(&format!("climate_ratio_{name}.asc")))?;
            }
        }
        match threshold {
            Some(t) => {
                let ranked = normalized_deltas_snn(&model, &ds, &rows, t, *source)?;
                write_ranked(&run.out, &format!("normalized_{name}"), &format!("SNN, {name} landslides"), &ranked)?;
            }
            None => log::warn!("no threshold; normalized SNN contributions skipped"),
        }
        if let Some(lm) = &logr {
            let src = match source {
                LdSource::Modeled(_) => LdSource::Modeled(logr_threshold),
                LdSource::Mapped => LdSource::Mapped,
            };
            let ranked = normalized_deltas_logr(lm, &ds, &rows, logr_threshold, src)?;
            write_ranked(&run.out, &format!("normalized_logr_{name}"), &format!("LogR, {name} landslides"), &ranked)?;
        }
    }
    if !ratio_ready {
        log::info!("climate/slope ratio skipped: model lacks '{slope}' or one of {climate:?} as single features");
    }
    println!("explained {} subnets over {} rows", labels.len(), rows.len());
    Ok(())
}
