//! # fradelay-core
//!
//! Numerical toolkit for the delay Caputo fractional system
//!
//! ```text
//! ᶜD^α x(t) = A x(t − τ) + g(x(t), x(t − τ)),   t ≥ 0,   0 < α < 1,
//! x(t)      = φ(t),                              t ∈ [−τ, 0].
//! ```
//!
//! The crate is organised bottom-up:
//!
//! - [`mlfunc`]: the delayed Mittag-Leffler function `E^{λ,τ}_{α,β}`, its absolute
//!   integrals and the sup-weight used by the stability constants.
//! - [`region`]: membership in the stability region `S_{α,τ}`, boundary sampling and an
//!   independent argument-principle count of characteristic roots.
//! - [`linops`]: diagonalisation of the linear part, γ-rescaling of nilpotent blocks
//!   and the transformed nonlinearity `h`.
//! - [`solver`]: the Lyapunov–Perron fixed-point solver, a direct L1 stepper and a
//!   Caputo residual check.
//! - [`analysis`]: the contraction constants `q`, `ε`, `δ`, empirical stability
//!   experiments and decay fits.
//! - [`io`]: the JSON input document and CSV artifacts shared with the CLI.
//!
//! Vectors are measured in the max-norm throughout, matching the sup-norm used for
//! trajectories.

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Tests pin quoted five-digit reference values such as 1.12838.
#![cfg_attr(test, allow(clippy::approx_constant))]

pub mod analysis;
pub mod complex;
pub mod io;
pub mod linops;
pub mod mlfunc;
pub mod nonlinearity;
pub mod quad;
pub mod region;
pub mod solver;

pub use analysis::{
    compute_constants, decay_fit, verify_stability, AnalysisError, ConstantsOptions, DecayFit,
    SimSolver, StabilityConstants, StabilityReport, Verdict, VerifyMode, VerifyOptions,
};
pub use complex::{principal_arg, ComplexScalar};
pub use io::{InputDoc, InputError};
pub use linops::{
    eigendecompose, estimate_lipschitz, estimate_lipschitz_dyn, gamma_rescale,
    matrix_eigenvalues, transform_nonlinearity, JordanBlock, JordanStructure, LinopsError,
    SystemMatrix, TransformedNonlinearity, TransformedSystem, DEFAULT_COND_LIMIT, DEFAULT_GAMMA,
};
pub use mlfunc::{
    abs_integral_profile, heaviside, ml_abs_integral, ml_eval, ml_sup_weight, EvalPolicy,
    MlError, MlKernel, MlParams,
};
pub use nonlinearity::{
    FnNonlinearity, Nonlinearity, NonlinearityError, NonlinearityKind, NonlinearitySpec,
};
pub use region::{
    boundary_samples, char_function, count_roots, count_unstable_roots, in_region,
    stability_window, BoundarySample, RegionError, RegionParams, RegionVerdict, RootCountWindow,
};
pub use solver::{
    caputo_residual, l1_caputo, l1_truncation_estimate, solve_direct, solve_picard,
    DelaySystemSpec, HistoryFunction, LpOperator, PicardReport, SolverError, Trajectory,
    TrajectoryMeta,
};
