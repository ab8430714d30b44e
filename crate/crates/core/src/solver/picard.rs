//! The Lyapunov–Perron operator and its Picard iteration.
//!
//! In diagonalised coordinates `y = (TP)⁻¹x` each component satisfies
//! `ᶜD^α y_i = λ_i y_i(t−τ) + h_i(y, y(t−τ))`, whose solutions are the fixed points of
//!
//! ```text
//! (𝒯ξ)_i(t) = E^{λ_i,τ}_{α,1}(t) ψ_i(0)
//!           + λ_i ∫_{−τ}^{0} E^{λ_i,τ}_{α,α}(t−τ−s) H(t−τ−s) ψ_i(s) ds
//!           + ∫_0^t E^{λ_i,τ}_{α,α}(t−s) h_i(ξ(s), ξ(s−τ)) ds,
//! ```
//!
//! with `ψ = (TP)⁻¹φ`. Both integrals are product rules: the data are interpolated
//! linearly between grid points and integrated exactly against the kernel, using that
//! `E_{α,α+1}` and `E_{α,α+2}` are the first and second antiderivatives of `E_{α,α}`
//! (term by term, including the delay shifts).
//!
//! Iteration runs on `[0, T]` only; by causality of Volterra operators its fixed point is
//! the restriction of the fixed point on `[0, ∞)`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DelaySystemSpec, SolverError, Trajectory, TrajectoryMeta};
use crate::linops::{
    eigendecompose, gamma_rescale, mat_vec, transform_nonlinearity, TransformedNonlinearity,
    TransformedSystem, DEFAULT_COND_LIMIT,
};
use crate::mlfunc::{EvalPolicy, MlKernel};
use crate::nonlinearity::{Nonlinearity, NonlinearityKind};

/// Largest imaginary part tolerated in a real system's back-transformed solution.
pub const IMAGINARY_TOL: f64 = 1e-8;

/// Convergence diagnostics of [`solve_picard`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PicardReport {
    /// Number of operator applications.
    pub iterations: usize,
    /// Sup-norm change of the last sweep.
    pub final_delta: f64,
    /// `delta_{k+1} / delta_k` for consecutive sweeps.
    pub contraction_ratios: Vec<f64>,
    /// All sweep deltas in order.
    pub deltas: Vec<f64>,
}

/// The operator `𝒯` discretised on the grid of a [`DelaySystemSpec`].
pub struct LpOperator {
    d: usize,
    m: usize,
    n: usize,
    h_step: f64,
    /// Product weights per component: `a[i][j]`, `b[i][j]` for cells `j = 0..n`.
    a_w: Vec<Vec<Complex64>>,
    b_w: Vec<Vec<Complex64>>,
    /// The ξ-independent part (first two terms), `(n + 1)·d` values.
    affine: Vec<Complex64>,
    /// `ψ` at the history grid points, `(m + 1)·d` values.
    psi: Vec<Complex64>,
    /// The original history samples, reused verbatim for the back-transformed rows.
    phi: Vec<Complex64>,
    ts: TransformedSystem,
    h: TransformedNonlinearity,
    h_vanishes: bool,
}

impl LpOperator {
    pub fn from_spec(spec: &DelaySystemSpec) -> Result<Self, SolverError> {
        spec.validate()?;
        let structure = match &spec.jordan {
            Some(j) => j.clone(),
            None => eigendecompose(&spec.a, DEFAULT_COND_LIMIT)?,
        };
        let ts = gamma_rescale(&structure, spec.gamma)?;
        let g: Arc<dyn Nonlinearity> = spec.nonlinearity()?;
        let h = transform_nonlinearity(g, &ts);
        let h_vanishes = spec.g.kind == NonlinearityKind::Zero && !ts.has_nilpotent();

        let d = spec.dim();
        let m = spec.steps_per_delay()?;
        let n = spec.n_steps()?;
        let hs = spec.h_step;
        let t_max = n as f64 * hs;
        let policy = EvalPolicy::default();

        let phi = spec.sampled_history()?;
        let mut psi = vec![Complex64::new(0.0, 0.0); (m + 1) * d];
        for i in 0..=m {
            ts.to_transformed(&phi[i * d..(i + 1) * d], &mut psi[i * d..(i + 1) * d]);
        }

        let mut a_w = Vec::with_capacity(d);
        let mut b_w = Vec::with_capacity(d);
        let mut affine = vec![Complex64::new(0.0, 0.0); (n + 1) * d];
        for (comp, &lambda) in ts.diag_lambdas.iter().enumerate() {
            let kern = |beta: f64| MlKernel::new(spec.alpha, beta, lambda, spec.tau, t_max, policy);
            let e1 = kern(1.0)?.eval_grid(hs, m, n)?;
            let f1 = kern(spec.alpha + 1.0)?.eval_grid(hs, m, n)?;
            let f2 = kern(spec.alpha + 2.0)?.eval_grid(hs, m, n)?;
            let mut aj = Vec::with_capacity(n);
            let mut bj = Vec::with_capacity(n);
            for j in 0..n {
                let w0 = f1[j + 1] - f1[j];
                let m1 = f1[j + 1] * hs - (f2[j + 1] - f2[j]);
                aj.push(w0 - m1 / hs);
                bj.push(m1 / hs);
            }
            let psi0 = psi[m * d + comp];
            for step in 0..=n {
                let mut s = e1[step] * psi0;
                if lambda != Complex64::new(0.0, 0.0) {
                    let mut hist = Complex64::new(0.0, 0.0);
                    for j in step.saturating_sub(m)..step {
                        hist += aj[j] * psi[(step - j) * d + comp] + bj[j] * psi[(step - j - 1) * d + comp];
                    }
                    s += lambda * hist;
                }
                affine[step * d + comp] = s;
            }
            a_w.push(aj);
            b_w.push(bj);
        }
        Ok(LpOperator {
            d,
            m,
            n,
            h_step: hs,
            a_w,
            b_w,
            affine,
            psi,
            phi,
            ts,
            h,
            h_vanishes,
        })
    }

    pub fn transformed_system(&self) -> &TransformedSystem {
        &self.ts
    }

    pub fn nonlinearity(&self) -> &TransformedNonlinearity {
        &self.h
    }

    /// True when `h ≡ 0`, so the operator is constant and one application is exact.
    pub fn is_constant(&self) -> bool {
        self.h_vanishes
    }

    /// `ξ₀`: `ψ` on `[−τ, 0]`, continued by the constant `ψ(0)`.
    pub fn initial_iterate(&self) -> Trajectory {
        let (d, m, n) = (self.d, self.m, self.n);
        let mut v = Vec::with_capacity((m + n + 1) * d);
        v.extend_from_slice(&self.psi);
        for _ in 0..n {
            v.extend_from_slice(&self.psi[m * d..(m + 1) * d]);
        }
        Trajectory::from_values(self.h_step, m, d, v)
    }

    /// `𝒯ξ` for `ξ` in transformed coordinates on the full grid.
    pub fn apply(&self, xi: &Trajectory) -> Result<Trajectory, SolverError> {
        let (d, m, n) = (self.d, self.m, self.n);
        if xi.dim != d || xi.origin != m || xi.len() != m + n + 1 {
            return Err(SolverError::Quadrature("iterate does not live on the operator grid".into()));
        }
        let zero = Complex64::new(0.0, 0.0);
        let mut out = Trajectory::zeros(self.h_step, m, d, m + n + 1);
        out.values_mut()[..(m + 1) * d].copy_from_slice(&self.psi);
        // f_k = h(ξ(t_k), ξ(t_k − τ)), k = 0..=n.
        let mut f = vec![zero; (n + 1) * d];
        if !self.h_vanishes {
            for k in 0..=n {
                self.h.eval(xi.row(m + k), xi.row(k), &mut f[k * d..(k + 1) * d]);
            }
        }
        for step in 1..=n {
            for c in 0..d {
                let mut s = self.affine[step * d + c];
                if !self.h_vanishes {
                    let (aw, bw) = (&self.a_w[c], &self.b_w[c]);
                    let mut conv = zero;
                    for j in 0..step {
                        conv += aw[j] * f[(step - j) * d + c] + bw[j] * f[(step - j - 1) * d + c];
                    }
                    s += conv;
                }
                out.row_mut(m + step)[c] = s;
            }
        }
        Ok(out)
    }

    /// Maps a transformed trajectory back to `x = TP·y`; history rows are the original
    /// samples of `φ`.
    pub fn to_original(&self, y: &Trajectory) -> Trajectory {
        let (d, m) = (self.d, self.m);
        let mut x = Trajectory::zeros(y.step, m, d, y.len());
        x.values_mut()[..(m + 1) * d].copy_from_slice(&self.phi);
        for i in m + 1..y.len() {
            let mut buf = vec![Complex64::new(0.0, 0.0); d];
            mat_vec(&self.ts.combined_transform, y.row(i), &mut buf);
            x.row_mut(i).copy_from_slice(&buf);
        }
        x
    }
}

fn sweep_delta(a: &Trajectory, b: &Trajectory) -> f64 {
    let mut delta: f64 = 0.0;
    for i in a.origin..a.len() {
        for (p, q) in a.row(i).iter().zip(b.row(i)) {
            delta = delta.max((p - q).norm());
        }
    }
    delta
}

/// Picard iteration `ξ_{k+1} = 𝒯ξ_k` from the constant continuation of `φ(0)`, until
/// the sup-norm change drops to `tol`. Returns the solution in original coordinates.
pub fn solve_picard(
    spec: &DelaySystemSpec,
    tol: f64,
    max_iter: usize,
) -> Result<(Trajectory, PicardReport), SolverError> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(SolverError::InvalidSpec("tol must be > 0 and max_iter >= 1".into()));
    }
    let op = LpOperator::from_spec(spec)?;
    let mut xi = op.initial_iterate();
    let mut report = PicardReport::default();
    if op.is_constant() {
        xi = op.apply(&xi)?;
        report.iterations = 1;
        report.final_delta = 0.0;
    } else {
        let mut converged = false;
        for it in 1..=max_iter {
            let next = op.apply(&xi)?;
            let delta = sweep_delta(&next, &xi);
            if let Some(&prev) = report.deltas.last() {
                if prev > 0.0 {
                    report.contraction_ratios.push(delta / prev);
                }
            }
            report.deltas.push(delta);
            report.iterations = it;
            report.final_delta = delta;
            xi = next;
            if !delta.is_finite() || delta > 1e100 {
                break;
            }
            if delta <= tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SolverError::NoConvergence {
                iterations: report.iterations,
                last_delta: report.final_delta,
            });
        }
    }
    let mut x = op.to_original(&xi);
    if spec.is_real() {
        let imag = x.max_imag();
        if imag > IMAGINARY_TOL {
            return Err(SolverError::ImaginaryResidue { max: imag });
        }
        if imag > 1e-12 {
            log::warn!("truncating imaginary residue {imag:.3e} of a real system");
        }
        x.values_mut().iter_mut().for_each(|z| z.im = 0.0);
    }
    let ratio = report.contraction_ratios.last().copied().unwrap_or(0.0);
    let est = if ratio < 1.0 {
        report.final_delta * ratio / (1.0 - ratio)
    } else {
        report.final_delta
    };
    x.meta = TrajectoryMeta {
        solver: "picard".into(),
        iterations: report.iterations,
        est_error: est,
    };
    Ok((x, report))
}
