use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use snn_core::dataset::load_csv;
use snn_core::monomial::expand;
use snn_core::pipeline::candidates;
use snn_core::{Error, Result};

use super::write_file;
use crate::args::CommonArgs;

/// Writes the composite-feature manifest for `--n` anonymous features or for
/// the features of `--data`.
#[derive(Debug, Clone, Default, Args)]
pub struct ExpandArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of features, named x1..xn.
    #[arg(long, conflicts_with = "data")]
    pub n: Option<usize>,
    /// Dataset whose feature names (and 0/1 exponent caps) are used.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Largest composite level.
    #[arg(long)]
    pub level: Option<u32>,
}

pub fn run(a: &ExpandArgs) -> Result<()> {
    let mut run = a.common.open("expand")?;
    let s = &mut run.settings;
    let level = s.get("level", a.level, 2)?;
    let n = s.optional("n", a.n)?;
    let data = s.path("data", a.data.clone())?;
    run.ready()?;
    let (names, monomials) = match (n, data) {
        (Some(n), None) => ((1..=n).map(|i| format!("x{i}")).collect::<Vec<_>>(), expand(n, level)?),
        (None, Some(path)) => {
            let ds = load_csv(path)?;
            (ds.feature_names().to_vec(), candidates(&ds, level)?)
        }
        _ => return Err(Error::Config("give exactly one of --n or --data".into())),
    };
    let mut csv = String::from("index,label,level\n");
    for (k, m) in monomials.iter().enumerate() {
        let _ = writeln!(csv, "{k},{},{}", m.label(&names), m.level());
    }
    write_file(&run.path("manifest.csv"), &csv)?;
    log::info!("{} composite features up to level {level}", monomials.len());
    println!("{} composite features", monomials.len());
    Ok(())
}
