//! Caputo residual of a grid trajectory.

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use super::direct::l1_weights;
use super::{DelaySystemSpec, SolverError, Trajectory};
use crate::linops::mat_vec;

/// L1 value of `ᶜD^α x` at the last sample, from samples `x_0, …, x_n` at `t_j = j·h`.
pub fn l1_caputo(samples: &[Complex64], h: f64, alpha: f64) -> Complex64 {
    let n = samples.len().saturating_sub(1);
    if n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let b = l1_weights(alpha, n);
    let mut s = Complex64::new(0.0, 0.0);
    for j in 0..n {
        s += (samples[n - j] - samples[n - j - 1]) * b[j];
    }
    s / (h.powf(alpha) * gamma(2.0 - alpha))
}

/// `max_n ‖L1[x](t_n) − A x(t_n − τ) − g(x(t_n), x(t_n − τ))‖∞` over interior grid
/// points `0 < t_n < T`.
pub fn caputo_residual(traj: &Trajectory, spec: &DelaySystemSpec) -> Result<f64, SolverError> {
    spec.validate()?;
    let m = spec.steps_per_delay()?;
    let d = spec.dim();
    if traj.dim != d || traj.origin != m || (traj.step - spec.h_step).abs() > 1e-15 {
        return Err(SolverError::Quadrature(
            "trajectory grid does not match the system".into(),
        ));
    }
    let n_max = traj.len() - 1 - m;
    if n_max < 2 {
        return Ok(0.0);
    }
    let g = spec.nonlinearity()?;
    let alpha = spec.alpha;
    let mu = spec.h_step.powf(alpha) * gamma(2.0 - alpha);
    let b = l1_weights(alpha, n_max);
    let zero = Complex64::new(0.0, 0.0);
    let mut deltas = vec![zero; n_max * d];
    for k in 1..=n_max {
        for c in 0..d {
            deltas[(k - 1) * d + c] = traj.row(m + k)[c] - traj.row(m + k - 1)[c];
        }
    }
    let mut lhs = vec![zero; d];
    let mut ax = vec![zero; d];
    let mut gv = vec![zero; d];
    let mut worst: f64 = 0.0;
    for n in 1..n_max {
        lhs.iter_mut().for_each(|v| *v = zero);
        for j in 0..n {
            let row = &deltas[(n - j - 1) * d..(n - j) * d];
            for c in 0..d {
                lhs[c] += row[c] * b[j];
            }
        }
        let x = traj.row(m + n);
        let y = traj.row(n);
        mat_vec(spec.a.entries(), y, &mut ax);
        g.eval(x, y, &mut gv);
        for c in 0..d {
            worst = worst.max((lhs[c] / mu - ax[c] - gv[c]).norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::SystemMatrix;
    use crate::nonlinearity::NonlinearitySpec;
    use crate::solver::{solve_direct, HistoryFunction};

    #[test]
    fn caputo_of_identity_at_one() {
        let h = 1e-3;
        let samples: Vec<Complex64> = (0..=1000).map(|j| Complex64::new(j as f64 * h, 0.0)).collect();
        let v = l1_caputo(&samples, h, 0.5);
        assert!((v.re - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-3);
        assert!((v.re - 1.12838).abs() < 1e-3);
    }

    #[test]
    fn zero_trajectory_has_zero_residual() {
        let spec = DelaySystemSpec::new(
            0.5,
            1.0,
            SystemMatrix::diagonal(&[Complex64::new(-1.0, 0.0)]).unwrap(),
            NonlinearitySpec::new(crate::nonlinearity::NonlinearityKind::Quadratic, vec![1.0]),
            HistoryFunction::zero(1),
            2.0,
            0.01,
        );
        let tr = solve_direct(&spec).unwrap();
        assert_eq!(caputo_residual(&tr, &spec).unwrap(), 0.0);
    }

    #[test]
    fn direct_output_is_self_consistent() {
        let spec = DelaySystemSpec::new(
            0.6,
            0.5,
            SystemMatrix::diagonal(&[Complex64::new(-0.8, 0.0)]).unwrap(),
            NonlinearitySpec::new(crate::nonlinearity::NonlinearityKind::Cubic, vec![0.5, 0.2]),
            HistoryFunction::constant_real(&[0.3]),
            3.0,
            0.01,
        );
        let tr = solve_direct(&spec).unwrap();
        let r = caputo_residual(&tr, &spec).unwrap();
        assert!(r <= 10.0 * tr.meta.est_error, "{r} vs {}", tr.meta.est_error);
    }
}
