//! Orthogonal series estimation of the log pairwise interaction function of
//! a stationary Gibbs point process, by truncated log-pseudolikelihood.

pub mod basis;
pub mod bessel;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod gibbs;
pub mod inference;
pub mod io;
pub mod irregular;
pub mod pattern;
pub mod simulate;

pub use basis::{BasisKind, BasisSystem};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentReport, ExperimentSpec, IrregularPolicy};
pub use fit::{build_quadrature, fit_lpl, Design, FitOptions, FitResult};
pub use gibbs::{GibbsModel, InteractionFunction, ModelDescriptor, ReferenceModel};
pub use inference::{select_k, CurveEstimate, SelectOptions, Selection};
pub use pattern::{Point, PointPattern, Window};
pub use simulate::{simulate, simulate_batch, MhConfig};
