use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ColumnGeneration,
    FrankWolfe,
    LocalSearch,
}

/// Per-run diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    /// Final `ln det` value (limit objective `g0`, or `ln det G` for exact designs).
    pub objective: f64,
    /// Certified duality gap (zero for local search).
    pub duality_gap: f64,
    /// Final constraint violation `max(0, max_i kappa_i - n)` over the full set.
    pub violation: f64,
    pub iterations: usize,
    pub support_size: usize,
    /// Points removed by the elimination filter.
    pub eliminated: usize,
    /// Size of the last working set (restricted subset, or surviving active set).
    pub working_set: usize,
    pub wall_time: f64,
    pub converged: bool,
}

impl SolveReport {
    pub fn new(method: Method) -> Self {
        SolveReport {
            method,
            objective: f64::NAN,
            duality_gap: f64::NAN,
            violation: f64::NAN,
            iterations: 0,
            support_size: 0,
            eliminated: 0,
            working_set: 0,
            wall_time: 0.0,
            converged: false,
        }
    }
}

/// One line of solver progress output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressRecord {
    pub iteration: usize,
    pub active: usize,
    pub working: usize,
    pub violation: f64,
    pub objective: f64,
    pub gap: f64,
}

impl ProgressRecord {
    pub(crate) fn emit(&self) {
        if let Ok(line) = serde_json::to_string(self) {
            eprintln!("{line}");
        }
    }
}
