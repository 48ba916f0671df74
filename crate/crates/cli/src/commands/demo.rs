//! End-to-end run on a generated raster scene: every other subcommand is
//! invoked on its output, each in its own directory with its own echoed
//! configuration.

use std::fmt::Write as _;

use clap::Args;
use snn_core::dataset::write_csv;
use snn_core::raster::write_ascii_grid;
use snn_core::synthetic::gen_raster_scene;
use snn_core::{seed, Result};

use super::baseline::{self, BaselineKind, FiArgs, LrArgs, MlpArgs, TabularArgs};
use super::eval::{self, EvalArgs};
use super::explain::{self, ExplainArgs};
use super::train::{self, TrainCmdArgs};
use super::{write_file, Evaluation};
use crate::args::{create_dir, CommonArgs, TrainArgs};

/// Tournament groups unless overridden; keeps a single-core run of the
/// default scene within a few minutes.
pub const DEMO_GROUPS: usize = 200;

#[derive(Debug, Clone, Default, Args)]
pub struct DemoArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Scene side length in cells.
    #[arg(long)]
    pub size: Option<usize>,
    /// Scene cell size in metres.
    #[arg(long)]
    pub cell_size: Option<f64>,
    /// Hidden widths of the MLP baseline.
    #[arg(long)]
    pub mlp_hidden: Option<String>,
    #[command(flatten)]
    pub train: TrainArgs,
}

pub fn run(a: &DemoArgs) -> Result<Vec<(String, Evaluation)>> {
    let mut run = a.common.open("demo")?;
    let top = run.seed;
    let s = &mut run.settings;
    let size = s.get("size", a.size, 120)?;
    let cell = s.get("cell-size", a.cell_size, 30.0)?;
    let mlp_hidden = s.get("mlp-hidden", a.mlp_hidden.clone(), "200,200".to_string())?;
    let mut train_args = a.train.clone();
    train_args.groups = Some(s.get("groups", a.train.groups, DEMO_GROUPS)?);
    let train_args = train_args.resolve(s)?;
    run.ready()?;

    let scene = gen_raster_scene(size, size, cell, seed::derive_str(top, "scene"))?;
    let rasters = run.path("rasters");
    create_dir(&rasters)?;
    for (name, grid) in &scene.features {
        write_ascii_grid(grid, rasters.join(format!("{name}.asc")))?;
    }
    write_ascii_grid(&scene.drainage_area, rasters.join("area.asc"))?;
    write_ascii_grid(&scene.storm_precip, rasters.join("precip.asc"))?;
    write_ascii_grid(&scene.inventory, rasters.join("inventory.asc"))?;
    let data = run.path("dataset.csv");
    write_csv(&scene.dataset, &data)?;
    println!("scene: {size}×{size} cells, {} landslide cells", scene.dataset.labels().iter().filter(|&&l| l == 1).count());

    let child = |dir: &str| CommonArgs {
        config: None,
        out: Some(run.path(dir)),
        seed: Some(top),
    };
    let mut results = Vec::new();

    let trained = train::run(&TrainCmdArgs {
        common: child("train"),
        data: Some(data.clone()),
        train: train_args,
        ..TrainCmdArgs::default()
    })?;
    log::info!("train: test AUROC {:.4}", trained.test_auroc);
    let model = run.path("train").join("model.json");
    let ev = eval::run(&EvalArgs {
        common: child("eval"),
        model: Some(model.clone()),
        data: Some(data.clone()),
        ..EvalArgs::default()
    })?;
    results.push(("SNN".to_string(), ev));

    let tabular = |dir: &str| TabularArgs {
        common: child(dir),
        data: Some(data.clone()),
        ..TabularArgs::default()
    };
    let lr = baseline::run(&BaselineKind::Lr(LrArgs {
        tabular: tabular("baseline_lr"),
        ..LrArgs::default()
    }))?;
    results.push(("LR".to_string(), lr));
    let logr = baseline::run(&BaselineKind::Logr(tabular("baseline_logr")))?;
    results.push(("LogR".to_string(), logr));
    let mlp = baseline::run(&BaselineKind::Mlp(MlpArgs {
        tabular: tabular("baseline_mlp"),
        hidden: Some(mlp_hidden),
        ..MlpArgs::default()
    }))?;
    results.push(("MLP".to_string(), mlp));
    let fi = baseline::run(&BaselineKind::Fi(FiArgs {
        common: child("baseline_fi"),
        slope: Some(rasters.join("Slope.asc")),
        precip: Some(rasters.join("precip.asc")),
        area: Some(rasters.join("area.asc")),
        inventory: Some(rasters.join("inventory.asc")),
        ..FiArgs::default()
    }))?;
    results.push(("FI (all cells)".to_string(), fi));

    explain::run(&ExplainArgs {
        common: child("explain"),
        model: Some(model),
        data: Some(data),
        cell_size: Some(cell),
        logr: Some(run.path("baseline_logr").join("logr_model.json")),
        ..ExplainArgs::default()
    })?;

    let mut summary = String::from("model,auroc,success_auc,threshold\n");
    for (name, ev) in &results {
        let _ = writeln!(summary, "{name},{},{},{}", ev.auroc, ev.success_auc, ev.threshold);
        println!("{name:>15}: AUROC {:.4}", ev.auroc);
    }
    write_file(&run.path("summary.csv"), &summary)?;
    Ok(results)
}
