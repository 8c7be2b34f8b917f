//! Multivariate expectiles of heavy-tailed risk vectors.
//!
//! * [`margins`]: Pareto, Burr and scaled Student margins with closed-form
//!   partial moments and tail profiles.
//! * [`expectile`]: the first-order optimality system of the Σ-expectile and
//!   a damped Newton solver for independent and comonotonic vectors.
//! * [`asymptotics`]: extreme-level limit vectors `(η, β)` and tail
//!   dependence models.
//! * [`estimation`]: Hill, tail-equivalence, Weissman and extreme
//!   multivariate expectile estimators.
//! * [`simulation`]: seeded sampling and the replication harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod error;
pub mod estimation;
pub mod expectile;
pub mod margins;
pub mod quad;
mod roots;
pub mod simulation;
pub mod special;

pub use asymptotics::{LimitVector, TailDependenceModel};
pub use error::{Error, Result};
pub use estimation::{Norm, SampleMatrix, TailEstimates};
pub use expectile::{Dependence, ExpectileProblem, ExpectileSolution, WeightMatrix};
pub use margins::{Family, MarginSpec, TailProfile};
pub use simulation::{ExperimentConfig, ExperimentRecord};
