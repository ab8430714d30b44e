//! Solvers for the delay Caputo initial value problem
//!
//! ```text
//! ᶜD^α x(t) = A x(t − τ) + g(x(t), x(t − τ)),  t ∈ (0, T],    x = φ on [−τ, 0].
//! ```
//!
//! Two independent methods are provided: Picard iteration of the Lyapunov–Perron
//! (variation-of-constants) operator in diagonalised coordinates ([`solve_picard`]) and
//! a direct L1 time stepper in the original coordinates ([`solve_direct`]). Both use a
//! uniform grid aligned with the delay knots, `τ = m·h`, `T = N·h`.

mod direct;
mod history;
mod picard;
mod residual;
mod trajectory;

use std::sync::Arc;

use thiserror::Error;

use crate::linops::{LinopsError, JordanStructure, SystemMatrix, DEFAULT_GAMMA};
use crate::mlfunc::MlError;
use crate::nonlinearity::{Nonlinearity, NonlinearityError, NonlinearitySpec};

pub use direct::{l1_truncation_estimate, solve_direct, INNER_MAX_ITER, INNER_TOL};
pub use history::HistoryFunction;
pub use picard::{solve_picard, LpOperator, PicardReport};
pub use residual::{caputo_residual, l1_caputo};
pub use trajectory::{Trajectory, TrajectoryMeta};

/// Relative tolerance for `τ` and `T` being multiples of the step.
pub const GRID_ALIGNMENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid system: {0}")]
    InvalidSpec(String),
    /// The grid is not aligned with the delay knots.
    #[error("quadrature grid error: {0}")]
    Quadrature(String),
    #[error("implicit step stalled at t = {t} (last change {change:.3e}); reduce h_step")]
    InnerIteration { t: f64, change: f64 },
    #[error("Picard iteration did not converge after {iterations} sweeps (last delta {last_delta:.3e})")]
    NoConvergence { iterations: usize, last_delta: f64 },
    /// The state left the representable range; the payload is the trajectory up to
    /// the last finite row.
    #[error("solution overflow at t = {t}")]
    Overflow { t: f64, partial: Box<Trajectory> },
    #[error("real system produced an imaginary residue of {max:.3e} after back-transform")]
    ImaginaryResidue { max: f64 },
    #[error(transparent)]
    Linops(#[from] LinopsError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
}

/// The IVP bundle `(α, τ, A, g, φ, T, h)`.
#[derive(Debug, Clone)]
pub struct DelaySystemSpec {
    pub alpha: f64,
    pub tau: f64,
    pub a: SystemMatrix,
    pub g: NonlinearitySpec,
    pub phi: HistoryFunction,
    /// Final time `T`.
    pub horizon: f64,
    pub h_step: f64,
    /// Explicit Jordan structure for defective `A`; otherwise `A` is diagonalised.
    pub jordan: Option<JordanStructure>,
    /// Scaling of nilpotent blocks.
    pub gamma: f64,
}

fn steps(len: f64, h: f64, name: &str) -> Result<usize, SolverError> {
    let r = len / h;
    let n = r.round();
    if n < 1.0 || (n * h - len).abs() > GRID_ALIGNMENT_TOL * len.max(1.0) {
        return Err(SolverError::Quadrature(format!(
            "h_step = {h} does not divide {name} = {len}"
        )));
    }
    Ok(n as usize)
}

impl DelaySystemSpec {
    /// A spec with the default `γ` and no explicit Jordan structure.
    pub fn new(
        alpha: f64,
        tau: f64,
        a: SystemMatrix,
        g: NonlinearitySpec,
        phi: HistoryFunction,
        horizon: f64,
        h_step: f64,
    ) -> Self {
        DelaySystemSpec {
            alpha,
            tau,
            a,
            g,
            phi,
            horizon,
            h_step,
            jordan: None,
            gamma: DEFAULT_GAMMA,
        }
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SolverError::InvalidSpec(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        for (name, v) in [("tau", self.tau), ("T", self.horizon), ("h_step", self.h_step)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SolverError::InvalidSpec(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(SolverError::InvalidSpec(format!("gamma must be > 0, got {}", self.gamma)));
        }
        steps(self.tau, self.h_step, "tau")?;
        steps(self.horizon, self.h_step, "T")?;
        if self.phi.dim() != self.dim() {
            return Err(SolverError::InvalidSpec(format!(
                "history has dimension {}, matrix {}",
                self.phi.dim(),
                self.dim()
            )));
        }
        self.phi.validate(self.tau)?;
        self.g.validate(self.dim())?;
        if let Some(j) = &self.jordan {
            let r = j.relative_residual(&self.a)?;
            if !(r <= 1e-8) {
                return Err(SolverError::InvalidSpec(format!(
                    "supplied Jordan structure does not match A (relative residual {r:.3e})"
                )));
            }
        }
        Ok(())
    }

    /// `m = τ/h`.
    pub fn steps_per_delay(&self) -> Result<usize, SolverError> {
        steps(self.tau, self.h_step, "tau")
    }

    /// `N = T/h`.
    pub fn n_steps(&self) -> Result<usize, SolverError> {
        steps(self.horizon, self.h_step, "T")
    }

    pub(crate) fn nonlinearity(&self) -> Result<Arc<dyn Nonlinearity>, SolverError> {
        Ok(self.g.build(self.dim())?)
    }

    /// Whether `A`, `g` and `φ` are all real, so the solution must be real.
    pub fn is_real(&self) -> bool {
        self.a.is_real() && self.phi.is_real()
    }

    /// The history sampled at `t = −τ + i·h`, `i = 0..=m`, flattened.
    pub(crate) fn sampled_history(&self) -> Result<Vec<num_complex::Complex64>, SolverError> {
        let m = self.steps_per_delay()?;
        let d = self.dim();
        let mut out = vec![num_complex::Complex64::new(0.0, 0.0); (m + 1) * d];
        for i in 0..=m {
            let t = (i as f64 - m as f64) * self.h_step;
            self.phi.eval(t, &mut out[i * d..(i + 1) * d]);
        }
        Ok(out)
    }

    /// A copy with different horizon and step.
    pub fn with_grid(&self, horizon: f64, h_step: f64) -> Self {
        DelaySystemSpec {
            horizon,
            h_step,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn scalar(lambda: f64, h: f64, t: f64) -> DelaySystemSpec {
        DelaySystemSpec::new(
            0.5,
            1.0,
            SystemMatrix::diagonal(&[Complex64::new(lambda, 0.0)]).unwrap(),
            NonlinearitySpec::zero(),
            HistoryFunction::constant(vec![Complex64::new(1.0, 0.0)]),
            t,
            h,
        )
    }

    #[test]
    fn grid_alignment_is_checked() {
        assert!(scalar(-1.0, 1e-3, 5.0).validate().is_ok());
        assert_eq!(scalar(-1.0, 1e-3, 5.0).steps_per_delay().unwrap(), 1000);
        assert!(matches!(
            scalar(-1.0, 0.3, 5.0).validate(),
            Err(SolverError::Quadrature(_))
        ));
        assert!(scalar(-1.0, 0.01, 0.0).validate().is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut s = scalar(-1.0, 0.1, 1.0);
        s.phi = HistoryFunction::constant(vec![Complex64::new(1.0, 0.0); 2]);
        assert!(matches!(s.validate(), Err(SolverError::InvalidSpec(_))));
    }
}
