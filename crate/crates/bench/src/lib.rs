//! Shared fixtures for the benchmarks.

use fradelay_core::{
    DelaySystemSpec, HistoryFunction, MlParams, NonlinearityKind, NonlinearitySpec, SystemMatrix,
};
use num_complex::Complex64;

/// `E_{0.5,1}` with `λ = −1`, `τ = 1`: the reference kernel.
pub fn reference_params() -> MlParams {
    MlParams::new(0.5, 1.0, Complex64::new(-1.0, 0.0), 1.0).expect("valid parameters")
}

/// Scalar `D^α x = −x(t − 1) + 0.05 x²` with constant history `0.1`.
pub fn quadratic_system(horizon: f64, h_step: f64) -> DelaySystemSpec {
    DelaySystemSpec::new(
        0.5,
        1.0,
        SystemMatrix::diagonal(&[Complex64::new(-1.0, 0.0)]).expect("diagonal matrix"),
        NonlinearitySpec::new(NonlinearityKind::Quadratic, vec![0.05]),
        HistoryFunction::constant_real(&[0.1]),
        horizon,
        h_step,
    )
}

/// A 2×2 rotation system with a cubic nonlinearity.
pub fn rotation_system(horizon: f64, h_step: f64) -> DelaySystemSpec {
    DelaySystemSpec::new(
        0.7,
        0.5,
        SystemMatrix::from_real_rows(&[vec![-0.6, 0.4], vec![-0.4, -0.6]]).expect("square matrix"),
        NonlinearitySpec::new(NonlinearityKind::Cubic, vec![0.4, 0.4]),
        HistoryFunction::constant_real(&[0.1, -0.05]),
        horizon,
        h_step,
    )
}
