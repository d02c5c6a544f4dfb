use thiserror::Error;

use crate::colgen::LimitSolution;
use crate::exact_design::ExactDesign;
use crate::rmp::RmpSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("data points do not span R^{n} (numerical rank {rank})")]
    RankDeficientData { n: usize, rank: usize },

    #[error("information matrix is singular: support does not span the space")]
    SingularInformation,

    #[error("swap would make the information matrix singular (determinant ratio {ratio:e})")]
    SingularAfterSwap { ratio: f64 },

    #[error("restricted subset does not span the space")]
    SubsetRankDeficient,

    #[error("interior-point solver stalled: gap {:e} after {} Newton steps", .0.gap, .0.newton_iters)]
    NewtonStalled(Box<RmpSolution>),

    #[error("iteration limit reached before convergence (violation {:e})", .0.report.violation)]
    IterationLimit(Box<LimitSolution>),

    #[error("no nonsingular exact design can be formed from the support")]
    InfeasibleRounding,

    #[error("local search hit the swap limit after {1} swaps")]
    SwapLimit(Box<ExactDesign>, usize),

    #[error("enumeration too large: {count} multisets")]
    TooLarge { count: u128 },

    #[error("coordinate {coord} has (near) zero variance")]
    DegenerateCoordinate { coord: usize },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
