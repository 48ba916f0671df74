//! End-to-end training: expansion, tournament, teacher, distillation and
//! superposition.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distill::{fractional_distill, parallel_distill, superpose, DistillConfig, FractionalResult};
use crate::metrics::{optimal_threshold, roc_curve};
use crate::monomial::{expand_bounded, exponent_caps};
use crate::rbf::ModelMetadata;
use crate::teacher::{train_teacher, TeacherConfig, TeacherModel};
use crate::tournament::{forward_select, run_tournament, Ranking, TournamentConfig, TournamentData};
use crate::{seed, CompositeBasis, CompositeEncoder, Dataset, Error, Monomial, Result, SnnModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Largest composite-feature level considered.
    pub max_level: u32,
    pub basis: CompositeBasis,
    pub tournament: TournamentConfig,
    pub teacher: TeacherConfig,
    pub distill: DistillConfig,
    pub region: String,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            max_level: 2,
            basis: CompositeBasis::Raw,
            tournament: TournamentConfig::default(),
            teacher: TeacherConfig::default(),
            distill: DistillConfig::default(),
            region: String::new(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Sets the top-level seed and derives every stage's seed from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.tournament.seed = seed::derive_str(seed, "tournament");
        self.teacher.seed = seed::derive_str(seed, "teacher");
        self.teacher.lm.seed = self.teacher.seed;
        self.distill.seed = seed::derive_str(seed, "distill");
        self
    }
}

/// Candidate composite features for a dataset; 0/1 features are capped at
/// exponent 1.
pub fn candidates(ds: &Dataset, max_level: u32) -> Result<Vec<Monomial>> {
    expand_bounded(max_level, &exponent_caps(ds))
}

#[derive(Debug, Clone)]
pub struct RankOutput {
    pub ranking: Ranking,
    /// Forward-selected features, most important first.
    pub selection: Vec<Monomial>,
}

pub fn rank(ds: &Dataset, candidates: &[Monomial], cfg: &TournamentConfig) -> Result<RankOutput> {
    let data = TournamentData::prepare(candidates, ds, cfg)?;
    let ranking = run_tournament(&data, cfg)?;
    let selection = forward_select(&ranking, &data, cfg)?;
    Ok(RankOutput { ranking, selection })
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: SnnModel,
    pub teacher: TeacherModel,
    pub fractional: FractionalResult,
}

/// Teacher, fractional and parallel distillation, and superposition on the
/// train partition for a fixed feature selection. The model threshold is the
/// optimal ROC cut on the train rows.
pub fn distill_model(ds: &Dataset, selection: &[Monomial], cfg: &PipelineConfig) -> Result<TrainOutput> {
    if selection.is_empty() {
        return Err(Error::Data("no features selected".into()));
    }
    let train = ds.train_indices();
    let teacher = train_teacher(ds, selection, cfg.basis, &cfg.teacher)?;
    let soft = teacher.predict(ds, &train)?;
    let encoder = CompositeEncoder::fit(ds, selection.to_vec(), cfg.basis)?;
    let columns = encoder.encode_columns(ds, &train);
    let names = encoder.labels();
    let labels: Vec<u8> = train.iter().map(|&i| ds.labels()[i]).collect();
    let fractional = fractional_distill(&soft, &columns, &names, &labels, &cfg.distill)?;
    let subnets = parallel_distill(&fractional.targets, &columns, &names, &cfg.distill)?;
    let mut extra = BTreeMap::new();
    extra.insert("seed".to_string(), cfg.seed.to_string());
    extra.insert("fractional_rounds".to_string(), fractional.state.rounds().to_string());
    let metadata = ModelMetadata {
        region: cfg.region.clone(),
        selection: names,
        extra,
    };
    let mut model = superpose(encoder, subnets, metadata)?;
    let scores = model.predict(ds, &train)?;
    model.threshold = Some(optimal_threshold(&roc_curve(&scores, &labels)?));
    Ok(TrainOutput {
        model,
        teacher,
        fractional,
    })
}

/// Full pipeline from raw features.
pub fn train_snn(ds: &Dataset, cfg: &PipelineConfig) -> Result<(RankOutput, TrainOutput)> {
    let cands = candidates(ds, cfg.max_level)?;
    let tcfg = TournamentConfig {
        basis: cfg.basis,
        ..cfg.tournament.clone()
    };
    let ranked = rank(ds, &cands, &tcfg)?;
    log::info!(
        "selected {} of {} candidates: {}",
        ranked.selection.len(),
        cands.len(),
        ranked
            .selection
            .iter()
            .map(|m| m.label(ds.feature_names()))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let trained = distill_model(ds, &ranked.selection, cfg)?;
    Ok((ranked, trained))
}
