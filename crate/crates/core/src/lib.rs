//! Factor-augmented regularized Cox proportional-hazards regression.
//!
//! The pipeline in one breath: estimate a low-rank factor structure in the
//! covariates, split each observation into factor and idiosyncratic parts,
//! then run a penalized Cox partial-likelihood fit on the augmented design
//! where the factor coordinates are left unpenalized. Decorrelating the
//! design this way is what lets l1-type penalties recover the right support
//! when raw covariates are strongly cross-correlated.
//!
//! Modules roughly follow the data flow:
//! * [`data`] - survival datasets, failure ordering, imputation, scaling
//! * [`cox`] - partial-likelihood loss, score, Hessian, diagnostics
//! * [`factor`] - covariance pilot, eigen decomposition, factor counts
//! * [`solver`] - weighted elastic-net coordinate descent and procedures
//! * [`tuning`] - lambda grids and cross-validated selection
//! * [`screening`] - factor-adjusted marginal screening
//! * [`metrics`] - concordance, selection and screening summaries
//! * [`sim`] - data generators and replication harnesses

pub mod cox;
pub mod data;
pub mod error;
pub mod factor;
pub mod metrics;
pub mod screening;
pub mod sim;
pub mod solver;
pub mod tuning;

pub use data::{FailureIndex, SurvivalDataset};
pub use error::{Error, Result};
pub use factor::FactorDecomposition;
pub use solver::{FitResult, Method, PenaltySpec, ProcedureFit};
