//! High-dimensional asymptotics of ridge-regularized ERM classification
//! on linear factor mixture data.
//!
//! The crate has two halves that check each other:
//!
//! * a **theory engine** that solves the self-consistent order-parameter
//!   system and turns its solution into predicted score distributions and
//!   train/test accuracies ([`fixed_point`], [`spectral`], [`metrics`]);
//! * an **empirical engine** that samples the same models, trains the
//!   actual ridge ERM classifier with Newton's method, and measures the
//!   same quantities by Monte Carlo ([`model`], [`erm`]).
//!
//! On top of both sits a universality audit: solve a model and its
//! moment-matched Gaussian mixture and compare — parameter agreement means
//! the classifier cannot tell the distributions apart asymptotically.
//!
//! ```
//! use lfmm::model::{build_haar_orthogonal, LfmmSpec, NoiseLaw};
//! use lfmm::spectral::SpectralCache;
//! use lfmm::fixed_point::{closed_form_square_loss, ExpectationGrid};
//! use lfmm::metrics::{generalization_accuracy, ScoreLaw};
//!
//! let p = 60;
//! let v = build_haar_orthogonal(p, 7);
//! let spec = LfmmSpec::new(v, vec![2f64.sqrt()], vec![NoiseLaw::Gaussian; p], 0.5)?;
//! let cache = SpectralCache::build(&spec, 180, 1.0)?;
//! let (params, derived) = closed_form_square_loss(&cache);
//! let grid = ExpectationGrid::build(&spec, 32)?;
//! let acc = generalization_accuracy(&ScoreLaw::from_solution(&spec, &derived), &grid);
//! assert!(params.theta > 0.0 && acc > 0.5 && acc < 1.0);
//! # Ok::<(), lfmm::Error>(())
//! ```

pub mod config;
pub mod erm;
pub mod fixed_point;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod quadrature;
pub mod spectral;

pub mod guide;

pub use losses::{Loss, ProxEvaluation};
pub use model::{build_haar_orthogonal, Dataset, LfmmSpec, NoiseLaw, ValidationReport};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model spec: {}", violations.join("; "))]
    InvalidSpec { violations: Vec<String> },
    #[error("kappa must be positive, got {0}")]
    NonPositiveKappa(f64),
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("non-smooth loss \"{0}\" is not supported (no smoothing fallback)")]
    NonSmoothLoss(String),
    #[error("unknown loss \"{0}\"")]
    UnknownLoss(String),
    #[error("unsupported noise law \"{0}\"")]
    UnsupportedNoiseLaw(String),
    #[error("numerical linear algebra failure: {0}")]
    Eigensolver(String),
    #[error("training did not converge after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    TrainingDiverged { iterations: usize, grad_norm: f64 },
    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
