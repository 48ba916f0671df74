use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use snn_core::pipeline::{candidates, rank, RankOutput};
use snn_core::tournament::write_ranking_csv;
use snn_core::{Dataset, Result};

use super::write_file;
use crate::args::{CommonArgs, SplitArgs, TrainArgs};

/// Tournament ranking and forward selection of composite features.
#[derive(Debug, Clone, Default, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset CSV with a 0/1 `target` column.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub train: TrainArgs,
}

pub fn write_rank_output(dir: &Path, ds: &Dataset, out: &RankOutput) -> Result<()> {
    write_ranking_csv(&out.ranking, ds.feature_names(), dir.join("ranking.csv"))?;
    let mut s = String::from("order,label\n");
    for (k, m) in out.selection.iter().enumerate() {
        let _ = writeln!(s, "{},{}", k + 1, m.label(ds.feature_names()));
    }
    write_file(&dir.join("selection.csv"), &s)
}

pub fn run(a: &RankArgs) -> Result<()> {
    let mut run = a.common.open("rank")?;
    let seed = run.seed;
    let s = &mut run.settings;
    let ds = a.split.load(s, a.data.clone(), seed)?;
    let level = s.get("level", a.train.level, 2)?;
    let cfg = a.train.tournament(s, seed)?;
    run.ready()?;
    let cands = candidates(&ds, level)?;
    log::info!("{} candidates, {} groups of {}", cands.len(), cfg.n_groups, cfg.group_size);
    let out = rank(&ds, &cands, &cfg)?;
    write_rank_output(&run.out, &ds, &out)?;
    let names = out.selection.iter().map(|m| m.label(ds.feature_names())).collect::<Vec<_>>();
    println!("selected: {}", names.join(", "));
    Ok(())
}
