//! Stability constants, empirical stability experiments and decay fits.
//!
//! [`compute_constants`] evaluates the contraction construction for the Lyapunov–Perron
//! operator: with `C = maxᵢ ∫₀^∞ |E^{λᵢ,τ}_{α,α}|`, the operator maps the ball of radius
//! `ε` into itself and contracts with factor `q = C·ℓ_h(ε) < 1` whenever the history is
//! bounded by `δ = ε(1 − q)/W`, where `W` is the largest sup-weight of the eigenvalues.
//! [`verify_stability`] runs the corresponding simulation experiment and
//! [`decay_fit`] measures the power-law decay of a single kernel.

mod constants;
mod decay;
mod verify;

use num_complex::Complex64;
use thiserror::Error;

use crate::linops::LinopsError;
use crate::mlfunc::MlError;
use crate::nonlinearity::NonlinearityError;
use crate::region::RegionError;
use crate::solver::SolverError;

pub use constants::{
    compute_constants, default_eps_grid, ConstantsOptions, EigenConstants, EpsPoint,
    StabilityConstants,
};
pub use decay::{decay_fit, DecayFit, DECAY_FIT_POINTS};
pub use verify::{
    random_history, verify_stability, EigenvalueVerdict, EmpiricalSummary, HistoryKind,
    HistoryOutcome, SimSolver, StabilityReport, Verdict, VerifyMode, VerifyOptions, DECAY_RATIO,
    GROWTH_FACTOR,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("invalid input: {0}")]
    Domain(String),
    #[error("eigenvalue {lambda} lies outside the stability region (margin {margin:.3e})")]
    OutsideRegion { lambda: Complex64, margin: f64 },
    #[error("no contraction on the eps grid: q = {best_q:.4} >= 1 even at eps = {eps:.3e}")]
    NoContraction { best_q: f64, eps: f64 },
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Linops(#[from] LinopsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
}
