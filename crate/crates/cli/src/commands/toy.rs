//! The four-input Boolean toy problem `y = x1·x2 + x3·x4 − 2·x1·x2·x3·x4`:
//! the tournament should isolate the three interaction terms and the
//! distilled subnets should recover their coefficients.

use std::fmt::Write as _;

use clap::Args;
use snn_core::distill::write_trace_csv;
use snn_core::pipeline::{distill_model, rank};
use snn_core::rbf::save_model;
use snn_core::synthetic::{gen_toy, toy_candidates, toy_names, toy_target, toy_truth_table, ToySpec, TOY_NOISE_SIGMA};
use snn_core::{seed, Result, SnnModel};

use super::explain::write_curves;
use super::rank::write_rank_output;
use super::write_file;
use crate::args::{CommonArgs, TrainArgs};

/// Step sizes f(1) − f(0) the subnets should recover.
pub const EXPECTED_STEPS: [(&str, f64); 3] = [("x1*x2", 1.0), ("x3*x4", 1.0), ("x1*x2*x3*x4", -2.0)];
pub const STEP_TOL: f64 = 0.15;
pub const TRUTH_TOL: f64 = 0.1;
/// Share of fresh noisy samples that must classify correctly at 0.5.
pub const NOISY_ACCURACY: f64 = 0.99;

#[derive(Debug, Clone, Default, Args)]
pub struct ToyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Training samples for each run.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Input noise of the noisy run.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Fresh noisy samples used to score the noisy run.
    #[arg(long)]
    pub noisy_eval: Option<usize>,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Clone)]
pub struct ToyReport {
    pub lines: Vec<(bool, String)>,
}

impl ToyReport {
    fn check(&mut self, ok: bool, msg: String) {
        self.lines.push((ok, msg));
    }

    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.0)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (ok, msg) in &self.lines {
            let _ = writeln!(s, "[{}] {msg}", if *ok { "PASS" } else { "FAIL" });
        }
        s
    }
}

/// `f(1) − f(0)` of each subnet on its raw composite scale.
pub fn step_differences(model: &SnnModel) -> Vec<(String, f64)> {
    model
        .labels()
        .into_iter()
        .enumerate()
        .map(|(j, label)| {
            let f = |raw: f64| model.subnets[j].eval(model.encoder.scaler.apply(j, raw));
            (label, f(1.0) - f(0.0))
        })
        .collect()
}

pub fn run(a: &ToyArgs) -> Result<ToyReport> {
    let mut run = a.common.open("toy")?;
    let top = run.seed;
    let s = &mut run.settings;
    let samples = s.get("samples", a.samples, ToySpec::default().n_samples)?;
    let noise = s.get("noise", a.noise, TOY_NOISE_SIGMA)?;
    let noisy_eval = s.get("noisy-eval", a.noisy_eval, 1000)?;
    let cfg = a.train.pipeline(s, top)?;
    run.ready()?;

    let names = toy_names();
    let mut report = ToyReport { lines: Vec::new() };
    let clean = gen_toy(&ToySpec {
        n_samples: samples,
        noise_sigma: 0.0,
        seed: seed::derive_str(top, "toy"),
    })?;
    let ranked = rank(&clean, &toy_candidates(), &cfg.tournament)?;
    write_rank_output(&run.out, &clean, &ranked)?;
    let order = ranked.ranking.ranked_labels().iter().map(|l| l.to_string()).collect::<Vec<_>>();
    let top3 = &order[..3.min(order.len())];
    report.check(
        order.first().is_some_and(|l| l == "x1*x2*x3*x4"),
        format!("x1*x2*x3*x4 ranks first (ranking: {})", order.join(", ")),
    );
    report.check(
        top3.iter().any(|l| l == "x1*x2") && top3.iter().any(|l| l == "x3*x4"),
        format!("x1*x2 and x3*x4 in the top 3 ({})", top3.join(", ")),
    );

    let trained = distill_model(&clean, &ranked.selection, &cfg)?;
    let model = &trained.model;
    save_model(model, run.path("model.json"))?;
    write_trace_csv(&trained.fractional.trace, run.path("distill_trace.csv"))?;
    let steps = step_differences(model);
    let mut csv = String::from("feature,step,expected\n");
    for (label, step) in &steps {
        let expected = EXPECTED_STEPS.iter().find(|e| e.0 == label).map_or(0.0, |e| e.1);
        let _ = writeln!(csv, "{label},{step},{expected}");
        report.check(
            (step - expected).abs() <= STEP_TOL,
            format!("{label}: f(1) - f(0) = {step:.4}, expected {expected} ± {STEP_TOL}"),
        );
    }
    write_file(&run.path("steps.csv"), &csv)?;
    for (label, _) in EXPECTED_STEPS {
        report.check(steps.iter().any(|s| s.0 == label), format!("{label} selected"));
    }

    let mut table = names.join(",") + ",target,prediction";
    for l in model.labels() {
        table.push_str(&format!(",{l}"));
    }
    table.push('\n');
    let mut worst: f64 = 0.0;
    for row in toy_truth_table() {
        let (y, parts) = model.eval_snn(&row)?;
        let target = toy_target(&row);
        worst = worst.max((y - target).abs());
        let cells: Vec<String> = row.iter().chain([target, y].iter()).chain(parts.iter()).map(|v| v.to_string()).collect();
        table.push_str(&cells.join(","));
        table.push('\n');
    }
    write_file(&run.path("truth_table.csv"), &table)?;
    report.check(worst <= TRUTH_TOL, format!("max |prediction - target| over 16 rows = {worst:.4} (≤ {TRUTH_TOL})"));
    let all: Vec<usize> = (0..clean.len()).collect();
    write_curves(&run.path("curves"), model, &clean, &all, 200)?;

    // Noisy run: same selection, inputs jittered after the labels are drawn.
    let noisy = gen_toy(&ToySpec {
        n_samples: samples,
        noise_sigma: noise,
        seed: seed::derive_str(top, "toy-noisy"),
    })?;
    let noisy_model = distill_model(&noisy, &ranked.selection, &cfg.clone().with_seed(seed::derive_str(top, "noisy")))?.model;
    save_model(&noisy_model, run.path("model_noisy.json"))?;
    let mut corners_ok = 0;
    for row in toy_truth_table() {
        let (y, _) = noisy_model.eval_snn(&row)?;
        corners_ok += ((y >= 0.5) == (toy_target(&row) == 1.0)) as usize;
    }
    report.check(corners_ok == 16, format!("noisy model, clean corners at 0.5: {corners_ok}/16"));
    let fresh = gen_toy(&ToySpec {
        n_samples: noisy_eval,
        noise_sigma: noise,
        seed: seed::derive_str(top, "toy-noisy-eval"),
    })?;
    let fresh_rows: Vec<usize> = (0..fresh.len()).collect();
    let pred = noisy_model.predict(&fresh, &fresh_rows)?;
    let correct = pred.iter().zip(fresh.labels()).filter(|(p, &l)| (**p >= 0.5) == (l == 1)).count();
    let acc = correct as f64 / fresh.len() as f64;
    report.check(
        acc >= NOISY_ACCURACY,
        format!("noisy model, fresh σ={noise} samples at 0.5: {correct}/{} correct (≥ {NOISY_ACCURACY})", fresh.len()),
    );
    write_curves(&run.path("curves_noisy"), &noisy_model, &noisy, &(0..noisy.len()).collect::<Vec<_>>(), 200)?;

    write_file(&run.path("report.txt"), &report.render())?;
    print!("{}", report.render());
    let n_pass = report.lines.iter().filter(|l| l.0).count();
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    println!("toy: {verdict} ({n_pass}/{} checks)", report.lines.len());
    Ok(report)
}
