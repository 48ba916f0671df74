//! Superposable neural networks (SNN) for binary susceptibility modeling.
//!
//! An SNN is an additive model: every input is a composite feature (a
//! primitive monomial of the original features) feeding its own small
//! radial-basis subnetwork, and the prediction is the plain sum of the
//! subnetwork outputs. Because nothing couples the inputs, the contribution
//! of each feature to every prediction is exact and directly readable.
//!
//! The training pipeline is:
//!
//! 1. [`monomial::expand`] generates candidate composite features.
//! 2. [`tournament`] ranks candidates by points won in many small group
//!    models and forward-selects the useful ones.
//! 3. [`teacher`] fits a multistage network on the selected features.
//! 4. [`distill::fractional_distill`] splits the teacher's soft targets into
//!    per-feature targets by round-robin residual fitting.
//! 5. [`distill::parallel_distill`] fits one RBF subnet per feature target.
//! 6. [`distill::superpose`] sums the subnets into an [`rbf::SnnModel`].
//!
//! Everything is fitted with the Levenberg–Marquardt optimizer in [`lm`].
//! [`metrics`], [`baselines`] and [`explain`] cover evaluation, comparison
//! models and the contribution analyses; [`pipeline`] wires the steps
//! together.

pub mod additive;
pub mod baselines;
pub mod dataset;
pub mod distill;
pub mod explain;
pub mod lm;
pub mod metrics;
pub mod mlp;
pub mod monomial;
pub mod pipeline;
pub mod raster;
pub mod rbf;
pub mod seed;
pub mod synthetic;
pub mod teacher;
pub mod tournament;

pub use dataset::{Dataset, Partition, Standardizer};
pub use monomial::{CompositeBasis, CompositeEncoder, Monomial};
pub use rbf::{RbfSubnet, SnnModel};

/// Errors produced anywhere in the library.
///
/// The variants map onto the CLI exit codes: `Config` is a usage problem,
/// `Io`/`Parse`/`Data`/`Model` are data problems and `Numerical` is an
/// optimizer or arithmetic failure.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: column '{column}': {message}")]
    Parse {
        path: String,
        line: usize,
        column: String,
        message: String,
    },
    #[error("{0}")]
    Data(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("model file: {0}")]
    Model(String),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
