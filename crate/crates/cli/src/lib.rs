//! Command implementations of the `fradelay` binary.
//!
//! Every command reads one JSON document (see [`fradelay_core::io`]) and writes CSV or
//! JSON to `--output` (default: stdout). The process exit code encodes the outcome:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success; all eigenvalues in the region; `stable_certified` |
//! | 1 | `stable_empirical` |
//! | 2 | invalid input (message names the field) |
//! | 3 | some eigenvalue outside the region; `unstable_empirical` |
//! | 4 | Picard iteration did not converge |
//! | 5 | solution overflow (trajectory truncated at the last finite row) |
//! | 6 | `inconclusive`; no contraction for the constants |
//! | 7 | other numerical failure |

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use fradelay_core::analysis::{
    compute_constants, verify_stability, AnalysisError, ConstantsOptions, SimSolver, Verdict,
    VerifyOptions,
};
use fradelay_core::io::{boundary_csv, ml_values_csv, validate_system, InputDoc, InputError};
use fradelay_core::mlfunc::{abs_integral_profile, EvalPolicy, MlError};
use fradelay_core::region::{
    boundary_samples, count_roots, count_unstable_roots, in_region, stability_window, RegionError,
    RootCountWindow,
};
use fradelay_core::solver::{solve_direct, solve_picard, DelaySystemSpec, SolverError, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_STABLE_EMPIRICAL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_OUTSIDE: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;
pub const EXIT_OVERFLOW: i32 = 5;
pub const EXIT_INCONCLUSIVE: i32 = 6;
pub const EXIT_FAILURE: i32 = 7;

#[derive(Debug, Parser)]
#[command(name = "fradelay", version, about = "Delay Caputo fractional systems: kernels, stability region, solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the delayed Mittag-Leffler function on a time grid (CSV t,re,im,abs).
    MlEval(CommonArgs),
    /// Cumulative ∫₀^t |E| on a time grid (CSV t,integral).
    MlIntegral(CommonArgs),
    /// Region membership of eigenvalues (JSON; exit 0 all inside, 3 otherwise).
    RegionCheck(RegionCheckArgs),
    /// Boundary of the stability region (CSV theta,radius,re,im).
    RegionBoundary(CommonArgs),
    /// Count characteristic roots in a right-half-plane window (JSON).
    CharRoots(CommonArgs),
    /// Integrate the system (trajectory CSV; summary JSON on stderr).
    Simulate(CommonArgs),
    /// Stability experiment with random histories (JSON report).
    Verify(CommonArgs),
    /// Contraction constants C, eps, q, delta (JSON).
    Constants(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverChoice {
    Picard,
    Direct,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Input JSON document.
    #[arg(long)]
    pub input: PathBuf,
    /// Output file (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Solver for simulate (default picard) and verify (default direct).
    #[arg(long, value_enum)]
    pub solver: Option<SolverChoice>,
    /// Picard stopping tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Overrides h_step (simulate, verify, constants) or quad_step (ml-integral).
    #[arg(long)]
    pub step: Option<f64>,
    /// Overrides T (simulate) or the experiment horizon (verify).
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Seed of the random histories (verify; required here or in the document).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the nilpotent scaling gamma.
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RegionCheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Also write the region boundary as CSV to this file.
    #[arg(long)]
    pub boundary: Option<PathBuf>,
}

/// A failed command with its exit code.
#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl From<InputError> for CliError {
    fn from(e: InputError) -> Self {
        CliError::new(EXIT_INVALID, format!("invalid input: {e}"))
    }
}

fn ml_error(e: MlError) -> CliError {
    match e {
        MlError::InvalidParams { .. } | MlError::Domain(_) => CliError::new(EXIT_INVALID, e.to_string()),
        MlError::Region { .. } => CliError::new(EXIT_OUTSIDE, e.to_string()),
        _ => CliError::new(EXIT_FAILURE, e.to_string()),
    }
}

fn region_error(e: RegionError) -> CliError {
    match e {
        RegionError::InvalidParams { .. } | RegionError::Domain(_) | RegionError::InvalidWindow(_) => {
            CliError::new(EXIT_INVALID, e.to_string())
        }
        _ => CliError::new(EXIT_FAILURE, e.to_string()),
    }
}

fn solver_error(e: SolverError) -> CliError {
    match e {
        SolverError::InvalidSpec(_) | SolverError::Quadrature(_) | SolverError::Nonlinearity(_) => {
            CliError::new(EXIT_INVALID, e.to_string())
        }
        SolverError::NoConvergence { .. } => CliError::new(EXIT_NO_CONVERGENCE, e.to_string()),
        SolverError::Overflow { .. } => CliError::new(EXIT_OVERFLOW, e.to_string()),
        _ => CliError::new(EXIT_FAILURE, e.to_string()),
    }
}

fn analysis_error(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::Domain(_) => CliError::new(EXIT_INVALID, e.to_string()),
        AnalysisError::OutsideRegion { .. } => CliError::new(EXIT_OUTSIDE, e.to_string()),
        AnalysisError::NoContraction { .. } => CliError::new(EXIT_INCONCLUSIVE, e.to_string()),
        AnalysisError::Solver(s) => solver_error(s),
        AnalysisError::Ml(m) => ml_error(m),
        AnalysisError::Region(r) => region_error(r),
        _ => CliError::new(EXIT_FAILURE, e.to_string()),
    }
}

/// What a successful command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    /// Main artifact, written to `--output` or stdout.
    pub output: String,
    /// Secondary summary, written to stderr.
    pub summary: Option<String>,
}

impl Outcome {
    fn ok(output: String) -> Self {
        Outcome {
            code: EXIT_OK,
            output,
            summary: None,
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn load(path: &PathBuf) -> Result<InputDoc, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(EXIT_INVALID, format!("cannot read {}: {e}", path.display())))?;
    Ok(InputDoc::from_json(&text)?)
}

fn positive(v: Option<f64>, flag: &str) -> Result<Option<f64>, CliError> {
    match v {
        Some(x) if !(x > 0.0) || !x.is_finite() => Err(CliError::new(
            EXIT_INVALID,
            format!("invalid input: --{flag} must be finite and > 0, got {x}"),
        )),
        other => Ok(other),
    }
}

/// The system with command-line overrides applied.
fn system(doc: &InputDoc, args: &CommonArgs, use_horizon: bool) -> Result<DelaySystemSpec, CliError> {
    let mut doc = doc.clone();
    if let Some(h) = positive(args.step, "step")? {
        doc.h_step = Some(h);
    }
    if use_horizon {
        if let Some(t) = positive(args.horizon, "horizon")? {
            doc.horizon = Some(t);
        }
    }
    if let Some(g) = positive(args.gamma, "gamma")? {
        doc.gamma = Some(g);
    }
    let spec = doc.system()?;
    validate_system(&spec)?;
    Ok(spec)
}

/// Runs one command.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::MlEval(a) => cmd_ml_eval(a),
        Command::MlIntegral(a) => cmd_ml_integral(a),
        Command::RegionCheck(a) => cmd_region_check(a),
        Command::RegionBoundary(a) => cmd_region_boundary(a),
        Command::CharRoots(a) => cmd_char_roots(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Constants(a) => cmd_constants(a),
    }
}

pub fn cmd_ml_eval(args: &CommonArgs) -> Result<Outcome, CliError> {
    let doc = load(&args.input)?;
    let p = doc.ml_params()?;
    let ts = doc.times()?;
    let t_max = ts.iter().cloned().fold(0.0, f64::max);
    let kernel = p.kernel(t_max, EvalPolicy::default()).map_err(ml_error)?;
    let rows = ts
        .iter()
        .map(|&t| kernel.eval(t).map(|v| (t, v)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(ml_error)?;
    Ok(Outcome::ok(ml_values_csv(&rows)))
}

pub fn cmd_ml_integral(args: &CommonArgs) -> Result<Outcome, CliError> {
    let mut doc = load(&args.input)?;
    // The integral is used with β = α unless the document says otherwise.
    if doc.beta.is_none() {
        doc.beta = doc.alpha;
    }
    let p = doc.ml_params()?;
    let mut ts = doc.times()?;
    if ts.windows(2).any(|w| w[1] < w[0]) {
        return Err(CliError::new(EXIT_INVALID, "invalid input: field `t`: times must be nondecreasing"));
    }
    ts.dedup();
    let quad_step = positive(args.step.or(doc.quad_step), "step")?.unwrap_or(1e-2);
    let t_max = ts.last().copied().unwrap_or(0.0);
    let kernel = p.kernel(t_max, EvalPolicy::default()).map_err(ml_error)?;
    let vals = abs_integral_profile(&kernel, &ts, quad_step).map_err(ml_error)?;
    let mut s = String::from("t,integral\n");
    for (t, v) in ts.iter().zip(vals) {
        s.push_str(&format!("{t},{v}\n"));
    }
    Ok(Outcome::ok(s))
}

#[derive(Serialize)]
struct RegionEntry {
    lambda: Complex64,
    member: bool,
    margin_to_boundary: f64,
    arg_ok: bool,
}

#[derive(Serialize)]
struct RegionReport {
    alpha: f64,
    tau: f64,
    all_member: bool,
    verdicts: Vec<RegionEntry>,
}

pub fn cmd_region_check(args: &RegionCheckArgs) -> Result<Outcome, CliError> {
    let doc = load(&args.common.input)?;
    let rp = doc.region_params()?;
    let lambdas = doc.eigenvalue_list()?;
    let verdicts: Vec<RegionEntry> = lambdas
        .iter()
        .map(|&lambda| {
            let v = in_region(lambda, &rp);
            RegionEntry {
                lambda,
                member: v.member,
                margin_to_boundary: v.margin_to_boundary,
                arg_ok: v.arg_ok,
            }
        })
        .collect();
    let all_member = verdicts.iter().all(|v| v.member);
    if let Some(path) = &args.boundary {
        let n = doc.samples.unwrap_or(200);
        let samples = boundary_samples(&rp, n).map_err(region_error)?;
        fs::write(path, boundary_csv(&samples))
            .map_err(|e| CliError::new(EXIT_FAILURE, format!("cannot write {}: {e}", path.display())))?;
    }
    let report = RegionReport {
        alpha: rp.alpha,
        tau: rp.tau,
        all_member,
        verdicts,
    };
    Ok(Outcome {
        code: if all_member { EXIT_OK } else { EXIT_OUTSIDE },
        output: to_json(&report),
        summary: None,
    })
}

pub fn cmd_region_boundary(args: &CommonArgs) -> Result<Outcome, CliError> {
    let doc = load(&args.input)?;
    let rp = doc.region_params()?;
    let samples = boundary_samples(&rp, doc.samples.unwrap_or(200)).map_err(region_error)?;
    Ok(Outcome::ok(boundary_csv(&samples)))
}

#[derive(Serialize)]
struct RootEntry {
    lambda: Complex64,
    window: RootCountWindow,
    roots: usize,
}

pub fn cmd_char_roots(args: &CommonArgs) -> Result<Outcome, CliError> {
    let doc = load(&args.input)?;
    let rp = doc.region_params()?;
    let lambdas = doc.eigenvalue_list()?;
    let mut out = Vec::with_capacity(lambdas.len());
    for lambda in lambdas {
        let (window, roots) = match doc.window {
            Some(w) => (w, count_roots(lambda, &rp, &w).map_err(region_error)?),
            None => (
                stability_window(lambda, &rp),
                count_unstable_roots(lambda, &rp).map_err(region_error)?,
            ),
        };
        out.push(RootEntry { lambda, window, roots });
    }
    Ok(Outcome::ok(to_json(&out)))
}

#[derive(Serialize)]
struct SimSummary {
    solver: String,
    iterations: usize,
    est_error: f64,
    final_norm: f64,
    sup_norm: f64,
    picard_final_delta: Option<f64>,
    max_deviation: Option<f64>,
}

fn summary_of(tr: &Trajectory, delta: Option<f64>, deviation: Option<f64>) -> String {
    to_json(&SimSummary {
        solver: tr.meta.solver.clone(),
        iterations: tr.meta.iterations,
        est_error: tr.meta.est_error,
        final_norm: tr.final_norm(),
        sup_norm: tr.sup_norm_forward(),
        picard_final_delta: delta,
        max_deviation: deviation,
    })
}

pub fn cmd_simulate(args: &CommonArgs) -> Result<Outcome, CliError> {
    let doc = load(&args.input)?;
    let spec = system(&doc, args, true)?;
    let tol = positive(args.tol, "tol")?.unwrap_or(1e-12);
    let overflow = |e: SolverError| -> Result<Outcome, CliError> {
        match e {
            SolverError::Overflow { t, partial } => Ok(Outcome {
                code: EXIT_OVERFLOW,
                output: partial.to_csv(),
                summary: Some(format!("solution overflow at t = {t}; trajectory truncated\n")),
            }),
            other => Err(solver_error(other)),
        }
    };
    log::info!("simulate: horizon {}, step {}", spec.horizon, spec.h_step);
    match args.solver.unwrap_or(SolverChoice::Picard) {
        SolverChoice::Direct => match solve_direct(&spec) {
            Ok(tr) => Ok(Outcome {
                code: EXIT_OK,
                summary: Some(summary_of(&tr, None, None)),
                output: tr.to_csv(),
            }),
            Err(e) => overflow(e),
        },
        SolverChoice::Picard => {
            let (tr, rep) = solve_picard(&spec, tol, 500).map_err(solver_error)?;
            Ok(Outcome {
                code: EXIT_OK,
                summary: Some(summary_of(&tr, Some(rep.final_delta), None)),
                output: tr.to_csv(),
            })
        }
        SolverChoice::Both => {
            let (tr, rep) = solve_picard(&spec, tol, 500).map_err(solver_error)?;
            let direct = match solve_direct(&spec) {
                Ok(d) => d,
                Err(e) => return overflow(e),
            };
            let dev = tr.max_deviation(&direct, spec.horizon).map_err(solver_error)?;
            Ok(Outcome {
                code: EXIT_OK,
                summary: Some(summary_of(&tr, Some(rep.final_delta), Some(dev))),
                output: tr.to_csv(),
            })
        }
    }
}

pub fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::StableCertified => EXIT_OK,
        Verdict::StableEmpirical => EXIT_STABLE_EMPIRICAL,
        Verdict::UnstableEmpirical => EXIT_OUTSIDE,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

pub fn cmd_verify(args: &CommonArgs) -> Result<Outcome, CliError> {
    let doc = load(&args.input)?;
    let seed = args.seed.or(doc.seed).ok_or_else(|| {
        CliError::new(EXIT_INVALID, "invalid input: field `seed`: required for verify (--seed or \"seed\")")
    })?;
    // The experiment horizon is set separately; `T` is optional here.
    let mut doc = doc;
    if doc.horizon.is_none() {
        doc.horizon = Some(doc.tau()?);
    }
    let spec = system(&doc, args, false)?;
    let vdoc = doc.verify.clone().unwrap_or_default();
    let mut opts = VerifyOptions::new(seed);
    opts.horizon = positive(args.horizon.or(vdoc.horizon), "horizon")?;
    opts.solver = match args.solver {
        None | Some(SolverChoice::Direct) => SimSolver::Direct,
        Some(SolverChoice::Picard) => SimSolver::Picard,
        Some(SolverChoice::Both) => {
            return Err(CliError::new(EXIT_INVALID, "invalid input: --solver both is not available for verify"))
        }
    };
    if let Some(t) = positive(args.tol, "tol")? {
        opts.picard_tol = t;
    }
    opts.eps_grid = doc.eps_grid.clone().unwrap_or_default();
    let n = vdoc.n_histories.unwrap_or(20);
    let scale = match vdoc.scale {
        Some(s) => s,
        // Default: the admissible radius when it exists, a small free scale otherwise.
        None => match compute_constants(&spec, &opts.eps_grid, &opts.constants) {
            Ok(c) => c.delta_x,
            Err(AnalysisError::OutsideRegion { .. } | AnalysisError::NoContraction { .. }) => 1e-2,
            Err(e) => return Err(analysis_error(e)),
        },
    };
    log::info!("verify: {n} histories at scale {scale:e}, seed {seed}");
    let report = verify_stability(&spec, n, scale, &opts).map_err(analysis_error)?;
    Ok(Outcome {
        code: verdict_code(report.verdict),
        output: to_json(&report),
        summary: None,
    })
}

pub fn cmd_constants(args: &CommonArgs) -> Result<Outcome, CliError> {
    let doc = load(&args.input)?;
    let spec = system(&doc, args, true)?;
    let eps = doc.eps_grid.clone().unwrap_or_default();
    let c = compute_constants(&spec, &eps, &ConstantsOptions::default()).map_err(analysis_error)?;
    Ok(Outcome::ok(to_json(&c)))
}
