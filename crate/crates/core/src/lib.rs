//! Low-rank recovery for rank-constrained generalized linear models.
//!
//! The crate provides dense spectral primitives ([`linalg`]), exponential-family
//! losses ([`glm`]), measurement simulators ([`measure`]), rank-`r` projection
//! oracles over regularity sets ([`project`]), the averaged projected gradient
//! and plain projected gradient solvers ([`solve`]) and empirical probes of the
//! curvature conditions those solvers rely on ([`probe`]). Text formats for
//! datasets and solver traces live in [`io`].

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod glm;
pub mod io;
pub mod linalg;
pub mod measure;
pub mod probe;
pub mod project;
pub mod solve;

pub use error::{Error, Result};
pub use glm::{Dataset, GlmFamily, GlmKind};
pub use linalg::{DenseMatrix, SvdResult};
pub use measure::{GroundTruth, MeasurementOp, TruthStyle};
pub use probe::RscRsmEstimate;
pub use project::ConstraintSpec;
pub use solve::{AvpgConfig, PgConfig, SolveOutput, SolveTrace};
