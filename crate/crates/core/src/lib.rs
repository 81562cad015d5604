//! Multi-objective Bayesian optimization under heteroscedastic noise.
//!
//! The central algorithm (`Mode::GpMotpe`) fits a stochastic-kriging model to
//! a randomly scalarized objective, samples candidates from MOTPE's "good"
//! Parzen densities, keeps those with a positive aggregated log-likelihood
//! ratio and picks the one with the largest modified expected improvement.
//! Pure-GP (PSO-maximized MEI), pure-MOTPE and random-search baselines share
//! the same loop, archive, and noisy benchmark problems.

// `!(x > y)` is used deliberately so NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod archive;
pub mod doe;
pub mod error;
pub mod gp;
pub mod normal;
mod optim;
pub mod optimizer;
pub mod pareto;
pub mod problems;
pub mod rng;
pub mod scalarize;
pub mod space;
pub mod tpe;

pub use archive::{Archive, ObservationRecord};
pub use error::{Error, Result};
pub use rng::{RngStream, StreamRng};
pub use space::{DesignPoint, DimKind, DimensionSpec, SearchSpace};
