//! Regularized maximum-likelihood training, grid search and
//! cross-validation.

mod cv;
mod fit;
mod lbfgs;
mod objective;

pub use cv::{cross_validate, grid_search, Candidate, CvReport, CvRow, GridSpec, Metric, Selection, DEFAULT_LAMBDAS};
pub use fit::{fit, fit_detailed, FitOutcome};
pub use lbfgs::{minimize, LbfgsConfig, Minimum, Termination, ROUNDING};
pub use objective::{nll_objective, random_parameters, NllObjective, TrainConfig};
