//! Flag groups shared by several subcommands and their resolution against
//! the configuration file.

use std::path::{Path, PathBuf};

use clap::Args;
use snn_core::dataset::{checkerboard_split, load_csv};
use snn_core::distill::DistillConfig;
use snn_core::pipeline::PipelineConfig;
use snn_core::teacher::TeacherConfig;
use snn_core::tournament::TournamentConfig;
use snn_core::{seed, CompositeBasis, Dataset, Error, Result};

use crate::config::Settings;

pub const DEFAULT_BLOCK: usize = 16;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// key = value file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Top-level seed; every random step derives from it.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Resolved common options.
pub struct Run {
    pub settings: Settings,
    pub out: PathBuf,
    pub seed: u64,
}

impl CommonArgs {
    pub fn open(&self, subcommand: &str) -> Result<Run> {
        let mut settings = Settings::load(self.config.as_deref())?;
        let named = settings.optional::<String>("subcommand", None)?;
        if named.as_deref().is_some_and(|n| n != subcommand) {
            return Err(Error::Config(format!(
                "configuration file is for '{}', not '{subcommand}'",
                named.unwrap_or_default()
            )));
        }
        settings.record("subcommand", subcommand);
        let out = settings.required_path("out", self.out.clone())?;
        let seed = settings.get("seed", self.seed, 0)?;
        std::fs::create_dir_all(&out).map_err(|e| Error::Data(format!("{}: {e}", out.display())))?;
        Ok(Run { settings, out, seed })
    }
}

impl Run {
    /// Rejects leftover config keys and writes the effective configuration.
    /// Called once every option is resolved, before any heavy work.
    pub fn ready(&self) -> Result<()> {
        self.settings.check_unused()?;
        self.settings.echo(&self.out)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct SplitArgs {
    /// Checkerboard tile size in cells.
    #[arg(long)]
    pub block: Option<usize>,
    /// Share of tiles tagged train.
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

impl SplitArgs {
    /// Loads the dataset and tags its train/test partition.
    pub fn load(&self, s: &mut Settings, data: Option<PathBuf>, top_seed: u64) -> Result<Dataset> {
        self.load_with_defaults(s, data, top_seed, DEFAULT_BLOCK, DEFAULT_TRAIN_FRACTION)
    }

    pub fn load_with_defaults(
        &self,
        s: &mut Settings,
        data: Option<PathBuf>,
        top_seed: u64,
        block: usize,
        train_fraction: f64,
    ) -> Result<Dataset> {
        let path = s.required_path("data", data)?;
        let block = s.get("block", self.block, block)?;
        let fraction = s.get("train-fraction", self.train_fraction, train_fraction)?;
        let ds = load_csv(&path)?;
        log::info!("{}: {} rows, {} features", path.display(), ds.len(), ds.n_features());
        checkerboard_split(&ds, block, fraction, seed::derive_str(top_seed, "split"))
    }
}

/// Every pipeline hyperparameter. Absent flags fall back to the library
/// defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    /// Largest composite-feature level.
    #[arg(long)]
    pub level: Option<u32>,
    /// Composite basis: raw or standardized.
    #[arg(long)]
    pub basis: Option<CompositeBasis>,
    /// Number of tournament groups.
    #[arg(long)]
    pub groups: Option<usize>,
    /// Candidates per tournament group.
    #[arg(long)]
    pub group_size: Option<usize>,
    /// RBF neurons per feature in a group model.
    #[arg(long)]
    pub group_neurons: Option<usize>,
    /// LM epochs for a group model.
    #[arg(long)]
    pub group_epochs: Option<usize>,
    /// LM epochs for each refit during backward elimination.
    #[arg(long)]
    pub refit_epochs: Option<usize>,
    /// Largest validation-AUROC loss at which a feature is still dropped.
    #[arg(long)]
    pub elimination_tol: Option<f64>,
    /// Smallest validation-AUROC gain that keeps a feature in forward selection.
    #[arg(long)]
    pub forward_tol: Option<f64>,
    /// Consecutive rejections that end forward selection.
    #[arg(long)]
    pub forward_patience: Option<usize>,
    /// RBF neurons per feature in the forward-selection model.
    #[arg(long)]
    pub forward_neurons: Option<usize>,
    /// LM epochs for each forward-selection fit.
    #[arg(long)]
    pub forward_epochs: Option<usize>,
    /// Validation share of the train rows inside the tournament.
    #[arg(long)]
    pub holdout: Option<f64>,
    /// Row cap per tournament group; 0 uses every train row.
    #[arg(long)]
    pub tournament_rows: Option<usize>,
    /// Teacher stages.
    #[arg(long)]
    pub teacher_stages: Option<usize>,
    /// Hidden tanh units per teacher stage.
    #[arg(long)]
    pub teacher_hidden: Option<usize>,
    /// LM epochs per teacher stage.
    #[arg(long)]
    pub teacher_epochs: Option<usize>,
    /// Row cap for the teacher; 0 uses every train row.
    #[arg(long)]
    pub teacher_rows: Option<usize>,
    /// Neurons in each fractional-distillation subnet.
    #[arg(long)]
    pub stage_neurons: Option<usize>,
    /// LM epochs per fractional-distillation round.
    #[arg(long)]
    pub stage_epochs: Option<usize>,
    /// Non-improving rounds that end fractional distillation.
    #[arg(long)]
    pub distill_patience: Option<usize>,
    /// Upper bound on fractional-distillation rounds.
    #[arg(long)]
    pub max_rounds: Option<usize>,
    /// Neurons in each final subnet.
    #[arg(long)]
    pub neurons: Option<usize>,
    /// LM epochs for each final subnet.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Region tag stored in the model file.
    #[arg(long)]
    pub region: Option<String>,
}

fn row_cap(v: usize) -> Option<usize> {
    (v > 0).then_some(v)
}

impl TrainArgs {
    /// Copy with the level, basis and tournament options resolved.
    pub fn resolve_tournament(&self, s: &mut Settings) -> Result<TrainArgs> {
        let d = TournamentConfig::default();
        Ok(TrainArgs {
            level: Some(s.get("level", self.level, PipelineConfig::default().max_level)?),
            basis: Some(s.get("basis", self.basis, d.basis)?),
            groups: Some(s.get("groups", self.groups, d.n_groups)?),
            group_size: Some(s.get("group-size", self.group_size, d.group_size)?),
            group_neurons: Some(s.get("group-neurons", self.group_neurons, d.neurons_per_feature)?),
            group_epochs: Some(s.get("group-epochs", self.group_epochs, d.lm.max_epochs)?),
            refit_epochs: Some(s.get("refit-epochs", self.refit_epochs, d.refit_epochs)?),
            elimination_tol: Some(s.get("elimination-tol", self.elimination_tol, d.elimination_tol)?),
            forward_tol: Some(s.get("forward-tol", self.forward_tol, d.forward_tol)?),
            forward_patience: Some(s.get("forward-patience", self.forward_patience, d.patience)?),
            forward_neurons: Some(s.get("forward-neurons", self.forward_neurons, d.forward_neurons)?),
            forward_epochs: Some(s.get("forward-epochs", self.forward_epochs, d.forward_epochs)?),
            holdout: Some(s.get("holdout", self.holdout, d.holdout)?),
            tournament_rows: Some(s.get("tournament-rows", self.tournament_rows, d.max_rows.unwrap_or(0))?),
            ..self.clone()
        })
    }

    /// Copy with every option resolved: flag, then file, then default.
    pub fn resolve(&self, s: &mut Settings) -> Result<TrainArgs> {
        let t = self.resolve_tournament(s)?;
        let td = TeacherConfig::default();
        let dd = DistillConfig::default();
        Ok(TrainArgs {
            teacher_stages: Some(s.get("teacher-stages", self.teacher_stages, td.stages)?),
            teacher_hidden: Some(s.get("teacher-hidden", self.teacher_hidden, td.hidden)?),
            teacher_epochs: Some(s.get("teacher-epochs", self.teacher_epochs, td.lm.max_epochs)?),
            teacher_rows: Some(s.get("teacher-rows", self.teacher_rows, td.max_rows.unwrap_or(0))?),
            stage_neurons: Some(s.get("stage-neurons", self.stage_neurons, dd.stage_neurons)?),
            stage_epochs: Some(s.get("stage-epochs", self.stage_epochs, dd.stage_epochs)?),
            distill_patience: Some(s.get("distill-patience", self.distill_patience, dd.patience)?),
            max_rounds: Some(s.get("max-rounds", self.max_rounds, dd.max_rounds)?),
            neurons: Some(s.get("neurons", self.neurons, dd.neurons)?),
            epochs: Some(s.get("epochs", self.epochs, dd.epochs)?),
            region: Some(s.get("region", self.region.clone(), String::new())?),
            ..t
        })
    }

    /// Tournament settings of a resolved copy.
    fn tournament_config(&self, seed: u64) -> Result<TournamentConfig> {
        let d = TournamentConfig::default();
        let req = |v: Option<usize>| v.expect("resolved");
        let cfg = TournamentConfig {
            group_size: req(self.group_size),
            n_groups: req(self.groups),
            neurons_per_feature: req(self.group_neurons),
            lm: d.lm.clone().with_epochs(req(self.group_epochs)),
            refit_epochs: req(self.refit_epochs),
            elimination_tol: self.elimination_tol.expect("resolved"),
            forward_tol: self.forward_tol.expect("resolved"),
            patience: req(self.forward_patience),
            forward_neurons: req(self.forward_neurons),
            forward_epochs: req(self.forward_epochs),
            holdout: self.holdout.expect("resolved"),
            max_rows: row_cap(req(self.tournament_rows)),
            basis: self.basis.expect("resolved"),
            seed: seed::derive_str(seed, "tournament"),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn tournament(&self, s: &mut Settings, seed: u64) -> Result<TournamentConfig> {
        self.resolve_tournament(s)?.tournament_config(seed)
    }

    pub fn pipeline(&self, s: &mut Settings, seed: u64) -> Result<PipelineConfig> {
        let r = self.resolve(s)?;
        let req = |v: Option<usize>| v.expect("resolved");
        let tournament = r.tournament_config(seed)?;
        let td = TeacherConfig::default();
        let teacher = TeacherConfig {
            stages: req(r.teacher_stages),
            hidden: req(r.teacher_hidden),
            lm: td.lm.clone().with_epochs(req(r.teacher_epochs)),
            max_rows: row_cap(req(r.teacher_rows)),
            seed: 0,
        };
        let distill = DistillConfig {
            stage_neurons: req(r.stage_neurons),
            stage_epochs: req(r.stage_epochs),
            patience: req(r.distill_patience),
            max_rounds: req(r.max_rounds),
            neurons: req(r.neurons),
            epochs: req(r.epochs),
            seed: 0,
        };
        distill.validate()?;
        Ok(PipelineConfig {
            max_level: r.level.expect("resolved"),
            basis: tournament.basis,
            tournament,
            teacher,
            distill,
            region: r.region.clone().unwrap_or_default(),
            seed,
        }
        .with_seed(seed))
    }
}

/// Comma-separated list flag.
pub fn split_list(raw: &str) -> Vec<String> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Which rows a command evaluates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RowSet {
    Train,
    Test,
    All,
}

impl std::fmt::Display for RowSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RowSet::Train => "train",
            RowSet::Test => "test",
            RowSet::All => "all",
        })
    }
}

impl std::str::FromStr for RowSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(RowSet::Train),
            "test" => Ok(RowSet::Test),
            "all" => Ok(RowSet::All),
            _ => Err(Error::Config(format!("rows must be train, test or all, got '{s}'"))),
        }
    }
}

impl RowSet {
    pub fn indices(self, ds: &Dataset) -> Result<Vec<usize>> {
        let rows = match self {
            RowSet::Train => ds.train_indices(),
            RowSet::Test => ds.test_indices(),
            RowSet::All => (0..ds.len()).collect(),
        };
        if rows.is_empty() {
            return Err(Error::Data(format!("no {self} rows in the dataset")));
        }
        Ok(rows)
    }
}
