//! D-optimal experimental design on large data sets.
//!
//! The continuous (limit) problem `max ln det(X U X^T)` over the simplex is
//! solved by column generation over a restricted master problem, or by
//! Frank-Wolfe with away steps; its support then seeds an exchange local
//! search for an exact design of `N` experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod colgen;
pub mod design;
pub mod ellipsoid;
pub mod error;
pub mod exact;
pub mod exact_design;
pub mod frank_wolfe;
pub mod harness;
pub mod linalg;
pub mod parallel;
pub mod report;
pub mod rmp;

pub use colgen::{run_column_generation, ColGenConfig, LimitSolution};
pub use design::{DesignMatrix, DesignWeights};
pub use ellipsoid::{duality_gap_certificate, info_matrix, log_det_objective, mahalanobis, EllipsoidMatrix, GapCertificate};
pub use error::{Error, Result};
pub use exact_design::ExactDesign;
pub use frank_wolfe::{fw_solve, ky_init, FwConfig};
pub use report::{Method, ProgressRecord, SolveReport};
pub use rmp::{solve_restricted, RmpConfig, RmpSolution};
