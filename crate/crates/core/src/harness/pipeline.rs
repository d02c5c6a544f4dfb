use serde::{Deserialize, Serialize};

use super::dataset::{avg_log_kurtosis, DatasetSpec};
use crate::colgen::{run_column_generation, ColGenConfig, LimitSolution};
use crate::error::{Error, Result};
use crate::exact::{bound_report, local_search, round_to_exact, BoundReport, LocalSearchConfig, RoundingVariant};
use crate::frank_wolfe::{fw_solve, FwConfig};
use crate::report::{Method, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitMethod {
    #[default]
    Colgen,
    Fw,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineConfig {
    pub method: LimitMethod,
    pub colgen: ColGenConfig,
    pub fw: FwConfig,
    pub rounding: RoundingVariant,
    pub search: LocalSearchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub spec: DatasetSpec,
    /// Exact design size `N`.
    pub experiments: usize,
    /// Limit solve first, then local search.
    pub reports: Vec<SolveReport>,
    pub bounds: BoundReport,
    /// Average log-kurtosis, absent when some coordinate is constant.
    pub kurtosis: Option<f64>,
    /// `(index, multiplicity)` pairs, ascending by index.
    pub design: Vec<(usize, u32)>,
    /// Support of the limit solution.
    pub support: Vec<usize>,
}

impl RunResult {
    /// Copy with all wall-clock timings zeroed.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.reports.iter_mut().for_each(|s| s.wall_time = 0.0);
        r
    }

    pub fn converged(&self) -> bool {
        self.reports.iter().all(|r| r.converged)
    }
}

/// Data -> limit problem -> rounding -> local search on the limit support ->
/// bounds. Iteration and swap limits do not abort the run; they are recorded
/// as unconverged reports.
pub fn run_pipeline(spec: &DatasetSpec, total: usize, cfg: &PipelineConfig) -> Result<RunResult> {
    spec.validate()?;
    if spec.kind == super::dataset::DatasetKind::SyntheticMixture && total < spec.n {
        return Err(Error::Domain(format!("N = {total} is smaller than n = {}", spec.n)));
    }
    let x = spec.materialize()?;
    if total < x.n() {
        return Err(Error::Domain(format!("N = {total} is smaller than n = {}", x.n())));
    }
    let kurtosis = avg_log_kurtosis(&x).ok();

    let limit: LimitSolution = match cfg.method {
        LimitMethod::Colgen => run_column_generation(&x, &cfg.colgen),
        LimitMethod::Fw => fw_solve(&x, &cfg.fw, None),
    }
    .or_else(|e| match e {
        Error::IterationLimit(sol) => Ok(*sol),
        e => Err(e),
    })?;

    let support = limit.weights.support().to_vec();
    let start = std::time::Instant::now();
    let init = round_to_exact(&x, &limit.weights, total, cfg.rounding)?;
    let (design, swaps, finished) = match local_search(&x, &support, init, &cfg.search) {
        Ok((d, s)) => (d, s, true),
        Err(Error::SwapLimit(d, s)) => (*d, s, false),
        Err(e) => return Err(e),
    };
    let search_report = SolveReport {
        method: Method::LocalSearch,
        objective: design.log_det(),
        duality_gap: 0.0,
        violation: 0.0,
        iterations: swaps,
        support_size: design.indices().len(),
        eliminated: 0,
        working_set: support.len(),
        wall_time: start.elapsed().as_secs_f64(),
        converged: finished,
    };
    let bounds = bound_report(&x, &limit.weights, &design)?;
    Ok(RunResult {
        spec: spec.clone(),
        experiments: total,
        reports: vec![limit.report, search_report],
        bounds,
        kurtosis,
        design: design.counts().iter().map(|(&i, &c)| (i, c)).collect(),
        support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    #[test]
    fn toy_file_pipeline() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.csv");
        std::fs::File::create(&path).unwrap().write_all(b"1,0\n0,1\n1,1\n").unwrap();
        let r = run_pipeline(&DatasetSpec::file(&path), 2, &PipelineConfig::default()).unwrap();
        assert_relative_eq!(r.bounds.gap, 0.2619, epsilon = 1e-4);
        assert!(r.bounds.corollary_satisfied);
        assert!(r.converged());
    }

    #[test]
    fn small_n_rejected_before_solving() {
        let spec = DatasetSpec::synthetic(5, 1000, 1);
        assert!(matches!(run_pipeline(&spec, 4, &PipelineConfig::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn deterministic() {
        let spec = DatasetSpec::synthetic(3, 400, 11).with_p(2.0);
        let cfg = PipelineConfig::default();
        let a = run_pipeline(&spec, 5, &cfg).unwrap().without_timings();
        let b = run_pipeline(&spec, 5, &cfg).unwrap().without_timings();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
