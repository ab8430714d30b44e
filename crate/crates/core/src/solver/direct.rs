//! Direct L1 time stepping with the method of steps.
//!
//! The L1 approximation of the Caputo derivative on the uniform grid `t_n = n·h` is
//!
//! ```text
//! ᶜD^α x(t_n) ≈ (1/μ) Σ_{j=0}^{n−1} b_j (x_{n−j} − x_{n−j−1}),
//! b_j = (j+1)^{1−α} − j^{1−α},   μ = h^α Γ(2−α).
//! ```
//!
//! Because `τ = m·h`, the delayed state `x_{n−m}` is always a known grid value (from the
//! history for `n ≤ m`), so each step is an implicit equation in `x_n` only through
//! `g(x_n, x_{n−m})`. It is solved by fixed-point iteration, with damping once the
//! iteration stops contracting.

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use super::{DelaySystemSpec, SolverError, Trajectory, TrajectoryMeta};
use crate::complex::max_norm;
use crate::linops::mat_vec;

/// Stopping tolerance of the per-step fixed-point iteration, relative to `1 + ‖x_n‖`.
pub const INNER_TOL: f64 = 1e-13;
/// Iteration cap of the per-step solve.
pub const INNER_MAX_ITER: usize = 50;
/// Norm beyond which the state is reported as overflowing.
const OVERFLOW_NORM: f64 = 1e150;

pub(crate) fn l1_weights(alpha: f64, n: usize) -> Vec<f64> {
    let p = 1.0 - alpha;
    (0..=n)
        .map(|j| ((j + 1) as f64).powf(p) - (j as f64).powf(p))
        .collect()
}

/// A local truncation indicator `h^{2−α}/Γ(3−α) · max_n ‖x_n − 2x_{n−1} + x_{n−2}‖/h²`
/// over `t ∈ (0, T]`.
pub fn l1_truncation_estimate(traj: &Trajectory, alpha: f64) -> f64 {
    let h = traj.step;
    let o = traj.origin;
    let mut m2: f64 = 0.0;
    for i in o + 2..traj.len() {
        let (a, b, c) = (traj.row(i), traj.row(i - 1), traj.row(i - 2));
        for k in 0..traj.dim {
            m2 = m2.max((a[k] - b[k] * 2.0 + c[k]).norm());
        }
    }
    h.powf(2.0 - alpha) / gamma(3.0 - alpha) * m2 / (h * h)
}

/// Integrates the system on `[0, T]` with the L1 scheme.
///
/// `meta.est_error` is [`l1_truncation_estimate`] plus the residual left by the inner
/// solve. On overflow the error carries the trajectory up to the last finite row.
pub fn solve_direct(spec: &DelaySystemSpec) -> Result<Trajectory, SolverError> {
    spec.validate()?;
    let m = spec.steps_per_delay()?;
    let n = spec.n_steps()?;
    let d = spec.dim();
    let h = spec.h_step;
    let alpha = spec.alpha;
    let g = spec.nonlinearity()?;
    let has_g = spec.g.kind != crate::nonlinearity::NonlinearityKind::Zero;
    let a = spec.a.entries();

    let mut traj = Trajectory::zeros(h, m, d, m + n + 1);
    let hist = spec.sampled_history()?;
    traj.values_mut()[..(m + 1) * d].copy_from_slice(&hist);

    let mu = h.powf(alpha) * gamma(2.0 - alpha);
    let b = l1_weights(alpha, n);
    // deltas[(k − 1)·d + c] = x_k − x_{k−1}
    let mut deltas = vec![Complex64::new(0.0, 0.0); n * d];
    let zero = Complex64::new(0.0, 0.0);
    let mut memory = vec![zero; d];
    let mut base = vec![zero; d];
    let mut ax = vec![zero; d];
    let mut x = vec![zero; d];
    let mut next = vec![zero; d];
    let mut gv = vec![zero; d];
    let mut max_inner_change: f64 = 0.0;

    for k in 1..=n {
        let i = m + k;
        memory.iter_mut().for_each(|v| *v = zero);
        for j in 1..k {
            let w = b[j];
            let row = &deltas[(k - j - 1) * d..(k - j) * d];
            for c in 0..d {
                memory[c] += row[c] * w;
            }
        }
        let delayed = traj.row(k).to_vec();
        let prev = traj.row(i - 1).to_vec();
        mat_vec(a, &delayed, &mut ax);
        for c in 0..d {
            base[c] = prev[c] - memory[c] + ax[c] * mu;
        }
        x.copy_from_slice(&prev);
        if has_g {
            let mut damped = false;
            let mut last_change = f64::INFINITY;
            let mut converged = false;
            for _ in 0..INNER_MAX_ITER {
                g.eval(&x, &delayed, &mut gv);
                for c in 0..d {
                    next[c] = base[c] + gv[c] * mu;
                }
                let change = next
                    .iter()
                    .zip(&x)
                    .fold(0.0_f64, |acc, (p, q)| acc.max((p - q).norm()));
                if !change.is_finite() {
                    break;
                }
                if change >= 0.99 * last_change {
                    damped = true;
                }
                if damped {
                    for c in 0..d {
                        x[c] = x[c] * 0.5 + next[c] * 0.5;
                    }
                } else {
                    x.copy_from_slice(&next);
                }
                last_change = change;
                if change <= INNER_TOL * (1.0 + max_norm(&x)) {
                    converged = true;
                    max_inner_change = max_inner_change.max(change);
                    break;
                }
            }
            if !converged {
                let t = k as f64 * h;
                if !last_change.is_finite() || max_norm(&x) > OVERFLOW_NORM {
                    traj.truncate(i);
                    return Err(SolverError::Overflow {
                        t,
                        partial: Box::new(traj),
                    });
                }
                return Err(SolverError::InnerIteration {
                    t,
                    change: last_change,
                });
            }
        } else {
            x.copy_from_slice(&base);
        }
        let norm = max_norm(&x);
        if !norm.is_finite() || norm > OVERFLOW_NORM {
            traj.truncate(i);
            return Err(SolverError::Overflow {
                t: k as f64 * h,
                partial: Box::new(traj),
            });
        }
        for c in 0..d {
            deltas[(k - 1) * d + c] = x[c] - prev[c];
        }
        traj.row_mut(i).copy_from_slice(&x);
    }
    let inner = 2.0 * max_inner_change.max(INNER_TOL) * (1.0 + traj.sup_norm_forward()) / mu;
    traj.meta = TrajectoryMeta {
        solver: "direct".into(),
        iterations: n,
        est_error: l1_truncation_estimate(&traj, alpha) + inner,
    };
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::SystemMatrix;
    use crate::nonlinearity::{NonlinearityKind, NonlinearitySpec};
    use crate::solver::HistoryFunction;

    fn scalar(lambda: f64, alpha: f64, g: NonlinearitySpec, c: f64, t: f64, h: f64) -> DelaySystemSpec {
        DelaySystemSpec::new(
            alpha,
            1.0,
            SystemMatrix::diagonal(&[Complex64::new(lambda, 0.0)]).unwrap(),
            g,
            HistoryFunction::constant_real(&[c]),
            t,
            h,
        )
    }

    #[test]
    fn first_interval_matches_closed_form() {
        let spec = scalar(-1.0, 0.5, NonlinearitySpec::zero(), 1.0, 1.0, 1e-3);
        let tr = solve_direct(&spec).unwrap();
        let g15 = gamma(1.5);
        let mut err: f64 = 0.0;
        for i in tr.origin..tr.len() {
            let t = tr.time(i);
            err = err.max((tr.row(i)[0].re - (1.0 - t.sqrt() / g15)).abs());
        }
        // The singular start limits the L1 scheme to O(h^α) in the max norm.
        assert!(err < 0.25 * 1e-3f64.sqrt(), "{err}");
        assert_eq!(tr.values()[..=tr.origin].iter().map(|z| z.re).collect::<Vec<_>>(), vec![1.0; 1001]);
    }

    #[test]
    fn zero_right_hand_side_keeps_the_value() {
        let spec = scalar(0.0, 0.5, NonlinearitySpec::zero(), 0.7, 3.0, 0.01);
        let tr = solve_direct(&spec).unwrap();
        for i in tr.origin..tr.len() {
            assert_eq!(tr.row(i)[0].re, 0.7);
        }
    }

    #[test]
    fn positive_lambda_grows_monotonically() {
        let spec = scalar(1.0, 0.5, NonlinearitySpec::zero(), 1.0, 10.0, 0.01);
        let tr = solve_direct(&spec).unwrap();
        for i in tr.origin + 1..tr.len() {
            assert!(tr.row(i)[0].re > tr.row(i - 1)[0].re);
        }
        assert!(tr.final_norm() > 10.0);
    }

    #[test]
    fn nonlinear_step_converges() {
        let g = NonlinearitySpec::new(NonlinearityKind::Quadratic, vec![0.05]);
        let spec = scalar(-1.0, 0.5, g, 0.1, 5.0, 0.01);
        let tr = solve_direct(&spec).unwrap();
        assert!(tr.final_norm() < 0.1);
        assert!(tr.meta.est_error > 0.0);
    }

    #[test]
    fn blow_up_is_reported_as_overflow() {
        let g = NonlinearitySpec::new(NonlinearityKind::Cubic, vec![1.0]);
        let spec = scalar(1.0, 0.5, g, 2.0, 20.0, 0.01);
        match solve_direct(&spec) {
            Err(SolverError::Overflow { partial, .. }) => assert!(partial.len() > partial.origin),
            Err(SolverError::InnerIteration { .. }) => {}
            other => panic!("expected blow-up, got {other:?}"),
        }
    }
}
