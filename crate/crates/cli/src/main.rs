use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use optd_core::colgen::{run_column_generation, ColGenConfig, LimitSolution};
use optd_core::design::{DesignMatrix, DesignWeights};
use optd_core::exact::{
    bound_report, brute_force_exact, local_search, round_to_exact, verify_lemma_tau, BoundReport, LocalSearchConfig,
    RoundingVariant, SearchVariant,
};
use optd_core::frank_wolfe::{fw_solve, FwConfig};
use optd_core::harness::{
    generate_mixture, load_dataset, run_pipeline, save_dataset, save_result, sinh_arcsinh_transform, DataFormat,
    DatasetSpec, LimitMethod, PipelineConfig,
};
use optd_core::report::SolveReport;
use optd_core::{parallel, Error, Result};

#[derive(Parser)]
#[command(name = "optd", version, about = "D-optimal designs and minimum-volume enclosing ellipsoids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Colgen,
    Fw,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    First,
    Best,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoundArg {
    Remainder,
    #[value(name = "topN", alias = "top-n")]
    TopN,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Binary,
}

#[derive(clap::Args, Clone)]
struct SolverArgs {
    /// Absolute tolerance on max_i x_i^T H x_i - n (fw default: 1e-5/n)
    #[arg(long)]
    tol: Option<f64>,
    /// Violated points added per column-generation round (default 5n)
    #[arg(long)]
    n0: Option<usize>,
    /// Duality-gap tolerance of the restricted master problem
    #[arg(long, default_value_t = 1e-9)]
    gaptol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Outer iterations (colgen) or steps (fw)
    #[arg(long)]
    max_iter: Option<usize>,
    /// Disable elimination of interior points
    #[arg(long)]
    no_hp: bool,
    /// Print progress records to stderr
    #[arg(long)]
    verbose: bool,
}

impl SolverArgs {
    fn colgen(&self) -> ColGenConfig {
        let mut cfg = ColGenConfig { n0: self.n0, seed: self.seed, verbose: self.verbose, ..Default::default() };
        if let Some(t) = self.tol {
            cfg.stop_tol = t;
        }
        cfg.rmp.gap_tol = self.gaptol;
        cfg.hp_elimination = !self.no_hp;
        if let Some(k) = self.max_iter {
            cfg.max_outer = k;
        }
        cfg
    }

    fn fw(&self) -> FwConfig {
        let mut cfg = FwConfig { tol: self.tol, seed: self.seed, verbose: self.verbose, ..Default::default() };
        if self.no_hp {
            cfg.hp_check_every = 0;
        }
        if let Some(k) = self.max_iter {
            cfg.max_iter = k;
        }
        cfg
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a five-component Gaussian mixture
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Apply x -> sinh(arcsinh(x) / p) entrywise
    Transform {
        #[arg(long)]
        p: f64,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Solve the limit problem (minimum-volume enclosing ellipsoid)
    Mvee {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "colgen")]
        method: MethodArg,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact design of N experiments by rounding and local search
    Exact {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "N")]
        total: usize,
        #[arg(long, value_enum, default_value = "best")]
        variant: VariantArg,
        #[arg(long, value_enum, default_value = "remainder")]
        round: RoundArg,
        /// Limit weights from a previous `mvee` run; solved with colgen if absent
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Search over all points instead of the limit support
        #[arg(long)]
        full: bool,
        #[arg(long, default_value_t = 100_000)]
        max_swaps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dataset, limit solve, exact design and bounds in one run
    Pipeline {
        /// JSON dataset spec
        #[arg(long)]
        spec: PathBuf,
        #[arg(long = "N")]
        total: usize,
        #[arg(long, value_enum, default_value = "colgen")]
        method: MethodArg,
        #[arg(long, value_enum, default_value = "best")]
        variant: VariantArg,
        #[arg(long, value_enum, default_value = "remainder")]
        round: RoundArg,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive search for the best exact design
    Oracle {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "N")]
        total: usize,
        /// Candidate indices (default: all points)
        #[arg(long, value_delimiter = ',')]
        candidates: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize, serde::Deserialize)]
struct MveeOutput {
    weights: DesignWeights,
    ellipsoid: Vec<Vec<f64>>,
    report: SolveReport,
    eliminated: Vec<usize>,
}

#[derive(Serialize)]
struct ExactOutput {
    design: Vec<(usize, u32)>,
    log_det: f64,
    swaps: usize,
    converged: bool,
    lemma_residual: f64,
    bounds: BoundReport,
}

#[derive(Serialize)]
struct OracleOutput {
    best_log_det: f64,
    counts: Vec<(usize, u32)>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn format_of(arg: Option<FormatArg>, path: &Path) -> DataFormat {
    match arg {
        Some(FormatArg::Csv) => DataFormat::Csv,
        Some(FormatArg::Binary) => DataFormat::Binary,
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("optd") => DataFormat::Binary,
            _ => DataFormat::Csv,
        },
    }
}

fn emit(value: &impl Serialize, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Runs the limit solver; an iteration limit yields the best iterate.
fn solve_limit(x: &DesignMatrix, method: MethodArg, solver: &SolverArgs) -> Result<LimitSolution> {
    let res = match method {
        MethodArg::Colgen => run_column_generation(x, &solver.colgen()),
        MethodArg::Fw => fw_solve(x, &solver.fw(), None),
    };
    match res {
        Err(Error::IterationLimit(sol)) => Ok(*sol),
        other => other,
    }
}

fn search_variant(v: VariantArg) -> SearchVariant {
    match v {
        VariantArg::First => SearchVariant::First,
        VariantArg::Best => SearchVariant::Best,
    }
}

fn rounding(r: RoundArg) -> RoundingVariant {
    match r {
        RoundArg::Remainder => RoundingVariant::LargestRemainder,
        RoundArg::TopN => RoundingVariant::TopN,
    }
}

fn run(cli: Cli) -> Result<bool> {
    parallel::configure_threads()?;
    match cli.command {
        Command::Gen { n, m, seed, out, format } => {
            let x = generate_mixture(n, m, seed)?;
            save_dataset(&x, &out, format_of(format, &out))?;
            Ok(true)
        }
        Command::Transform { p, input, out, format } => {
            let x = load_dataset(&input, None)?;
            let y = sinh_arcsinh_transform(&x, p)?;
            save_dataset(&y, &out, format_of(format, &out))?;
            Ok(true)
        }
        Command::Mvee { input, method, solver, out } => {
            let x = load_dataset(&input, None)?;
            let sol = solve_limit(&x, method, &solver)?;
            let h = sol.ellipsoid.matrix();
            let output = MveeOutput {
                weights: sol.weights,
                ellipsoid: (0..h.nrows()).map(|r| h.row(r).iter().copied().collect()).collect(),
                report: sol.report,
                eliminated: sol.eliminated,
            };
            emit(&output, out.as_deref())?;
            Ok(output.report.converged)
        }
        Command::Exact { input, total, variant, round, weights, full, max_swaps, out } => {
            let x = load_dataset(&input, None)?;
            if total < x.n() {
                return Err(Error::Domain(format!("N = {total} is smaller than n = {}", x.n())));
            }
            let (u, limit_ok) = match weights {
                Some(path) => {
                    let prev: MveeOutput = serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?;
                    let ok = prev.report.converged;
                    (prev.weights, ok)
                }
                None => {
                    let sol = match run_column_generation(&x, &ColGenConfig::default()) {
                        Err(Error::IterationLimit(sol)) => *sol,
                        other => other?,
                    };
                    let ok = sol.report.converged;
                    (sol.weights, ok)
                }
            };
            if u.m() != x.m() {
                return Err(Error::DimensionMismatch { expected: x.m(), found: u.m() });
            }
            let s: Vec<usize> = if full { (0..x.m()).collect() } else { u.support().to_vec() };
            let cfg = LocalSearchConfig { variant: search_variant(variant), max_swaps, ..Default::default() };
            let init = round_to_exact(&x, &u, total, rounding(round))?;
            let (design, swaps, finished) = match local_search(&x, &s, init, &cfg) {
                Ok((d, k)) => (d, k, true),
                Err(Error::SwapLimit(d, k)) => (*d, k, false),
                Err(e) => return Err(e),
            };
            let output = ExactOutput {
                design: design.counts().iter().map(|(&i, &c)| (i, c)).collect(),
                log_det: design.log_det(),
                swaps,
                converged: finished,
                lemma_residual: verify_lemma_tau(&x, &s, &design),
                bounds: bound_report(&x, &u, &design)?,
            };
            emit(&output, out.as_deref())?;
            Ok(finished && limit_ok)
        }
        Command::Pipeline { spec, total, method, variant, round, solver, out } => {
            let spec: DatasetSpec = serde_json::from_reader(std::io::BufReader::new(File::open(spec)?))?;
            let cfg = PipelineConfig {
                method: match method {
                    MethodArg::Colgen => LimitMethod::Colgen,
                    MethodArg::Fw => LimitMethod::Fw,
                },
                colgen: solver.colgen(),
                fw: solver.fw(),
                rounding: rounding(round),
                search: LocalSearchConfig { variant: search_variant(variant), ..Default::default() },
            };
            let result = run_pipeline(&spec, total, &cfg)?;
            match out {
                Some(path) => save_result(&result, &path)?,
                None => emit(&result, None)?,
            }
            Ok(result.converged())
        }
        Command::Oracle { input, total, candidates, out } => {
            let x = load_dataset(&input, None)?;
            let cand = candidates.unwrap_or_else(|| (0..x.m()).collect());
            let (best, counts) = brute_force_exact(&x, &cand, total)?;
            emit(&OracleOutput { best_log_det: best, counts: counts.into_iter().collect() }, out.as_deref())?;
            Ok(true)
        }
    }
}
