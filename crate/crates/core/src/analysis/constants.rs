//! The constants `C(α, λ)`, `q`, `ε` and `δ` of the contraction argument.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::linops::{
    eigendecompose, estimate_lipschitz_dyn, gamma_rescale, transform_nonlinearity,
    TransformedNonlinearity, DEFAULT_COND_LIMIT,
};
use crate::mlfunc::{abs_integral_profile, ml_sup_weight, EvalPolicy, MlError, MlParams};
use crate::nonlinearity::Nonlinearity;
use crate::region::{in_region, RegionParams};
use crate::solver::DelaySystemSpec;

/// Numerical settings of [`compute_constants`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsOptions {
    /// Upper limit `T_C` of the computed part of `∫₀^∞ |E_{α,α}|`.
    pub integral_horizon: f64,
    /// Cell width of the absolute-integral quadrature.
    pub quad_step: f64,
    /// Grid horizon of the sup-weight.
    pub sup_horizon: f64,
    /// Grid step of the sup-weight.
    pub sup_grid_step: f64,
    /// Seed of the sampled Lipschitz estimate, used only when `g` has no analytic bound.
    pub lipschitz_seed: u64,
}

impl Default for ConstantsOptions {
    fn default() -> Self {
        ConstantsOptions {
            integral_horizon: 100.0,
            quad_step: 1e-2,
            sup_horizon: 40.0,
            sup_grid_step: 1e-2,
            lipschitz_seed: 0,
        }
    }
}

impl ConstantsOptions {
    fn validate(&self) -> Result<(), AnalysisError> {
        for (name, v) in [
            ("integral_horizon", self.integral_horizon),
            ("quad_step", self.quad_step),
            ("sup_horizon", self.sup_horizon),
            ("sup_grid_step", self.sup_grid_step),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(AnalysisError::Domain(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Per-eigenvalue ingredients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenConstants {
    pub lambda: Complex64,
    /// `∫₀^{T_C} |E_{α,α}|`.
    pub integral: f64,
    /// Bound for `∫_{T_C}^∞ |E_{α,α}|`.
    pub tail: f64,
    pub sup_weight: f64,
}

/// One point of the `ε` scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsPoint {
    pub eps: f64,
    pub ell_h: f64,
    pub q: f64,
    /// `ε(1 − q)/W` where `q < 1`.
    pub delta: Option<f64>,
}

/// Result of [`compute_constants`]. `eps`, `q`, `delta` refer to the transformed
/// coordinates `y = (TP)⁻¹x`; `eps_x` and `delta_x` are the corresponding radii in the
/// original coordinates: `‖φ‖∞ ≤ delta_x` implies `‖ψ‖∞ ≤ δ`, and `‖y‖∞ ≤ ε` implies
/// `‖x‖∞ ≤ eps_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityConstants {
    #[serde(rename = "C_alpha_lambda")]
    pub c_alpha_lambda: f64,
    pub eps: f64,
    pub q: f64,
    pub delta: f64,
    pub ell_h: f64,
    /// `W = maxᵢ sup_t |E_{α,1}(t)| + |λᵢ| ∫_{t−τ}^t |E_{α,α}| + 1`.
    pub sup_weight: f64,
    pub eps_x: f64,
    pub delta_x: f64,
    pub gamma: f64,
    /// Whether `ℓ_h` came from analytic bounds (otherwise sampled).
    pub analytic_lipschitz: bool,
    pub eigenvalues: Vec<EigenConstants>,
    pub eps_scan: Vec<EpsPoint>,
}

/// Geometric grid of 41 radii from `10⁻⁴` to `1`.
pub fn default_eps_grid() -> Vec<f64> {
    (0..=40).map(|i| 10f64.powf(-4.0 + i as f64 / 10.0)).collect()
}

/// `∫₀^∞ |E^{λ,τ}_{α,α}|` as the quadrature up to `T_C` plus the tail bound
/// `C'/(α T_C^α)`, where `C'` is the largest `|E(s)|·s^{α+1}` over `[T_C/2, T_C]`.
fn integral_with_tail(p: &MlParams, opts: &ConstantsOptions) -> Result<(f64, f64), AnalysisError> {
    let t_c = opts.integral_horizon;
    let kernel = p.kernel(t_c, EvalPolicy::default())?;
    let integral = abs_integral_profile(&kernel, &[t_c], opts.quad_step)?[0];
    let samples = 2000;
    let mut c_prime: f64 = 0.0;
    for i in 0..samples {
        let s = 0.5 * t_c + (i as f64 + 0.5) * 0.5 * t_c / samples as f64;
        match kernel.eval(s) {
            Ok(z) => c_prime = c_prime.max(z.norm() * s.powf(p.alpha + 1.0)),
            Err(MlError::Singular { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok((integral, c_prime / (p.alpha * t_c.powf(p.alpha))))
}

fn ell_h_at(h: &TransformedNonlinearity, eps: f64, seed: u64) -> Result<(f64, bool), AnalysisError> {
    match h.lipschitz_bound(eps) {
        Some(v) => Ok((v, true)),
        None => Ok((estimate_lipschitz_dyn(h, eps, seed)?, false)),
    }
}

/// Evaluates `C`, scans `eps_grid` for the largest `ε` with `q = C·ℓ_h(ε) < 1` and
/// returns `δ = ε(1 − q)/W` for it. An empty grid means [`default_eps_grid`].
pub fn compute_constants(
    spec: &DelaySystemSpec,
    eps_grid: &[f64],
    opts: &ConstantsOptions,
) -> Result<StabilityConstants, AnalysisError> {
    spec.validate()?;
    opts.validate()?;
    let grid: Vec<f64> = if eps_grid.is_empty() {
        default_eps_grid()
    } else {
        eps_grid.to_vec()
    };
    if grid.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(AnalysisError::Domain("eps grid entries must be finite and > 0".into()));
    }
    let structure = match &spec.jordan {
        Some(j) => j.clone(),
        None => eigendecompose(&spec.a, DEFAULT_COND_LIMIT)?,
    };
    let ts = gamma_rescale(&structure, spec.gamma)?;
    let rp = RegionParams::new(spec.alpha, spec.tau)?;
    for &lambda in &ts.diag_lambdas {
        let v = in_region(lambda, &rp);
        if !v.member {
            return Err(AnalysisError::OutsideRegion {
                lambda,
                margin: v.margin_to_boundary,
            });
        }
    }

    // |E| is symmetric under λ ↦ λ̄, so conjugate pairs share their constants.
    let mut eig: Vec<EigenConstants> = Vec::new();
    for &lambda in &ts.diag_lambdas {
        let key = Complex64::new(lambda.re, lambda.im.abs());
        if let Some(e) = eig.iter().find(|e| Complex64::new(e.lambda.re, e.lambda.im.abs()) == key) {
            let copy = EigenConstants { lambda, ..e.clone() };
            eig.push(copy);
            continue;
        }
        let pa = MlParams::new(spec.alpha, spec.alpha, lambda, spec.tau)?;
        let p1 = pa.with_beta(1.0);
        let (integral, tail) = integral_with_tail(&pa, opts)?;
        let sup_horizon = opts.sup_horizon.max(2.0 * spec.tau);
        let w = ml_sup_weight(&p1, &pa, opts.sup_grid_step, sup_horizon)?;
        eig.push(EigenConstants {
            lambda,
            integral,
            tail,
            sup_weight: w,
        });
    }
    let c = eig.iter().map(|e| e.integral + e.tail).fold(0.0, f64::max);
    let w = eig.iter().map(|e| e.sup_weight).fold(0.0, f64::max);

    let g: Arc<dyn Nonlinearity> = spec.g.build(spec.dim())?;
    let h = transform_nonlinearity(g, &ts);
    let mut analytic = true;
    let mut scan = Vec::with_capacity(grid.len());
    for &eps in &grid {
        let (ell, a) = ell_h_at(&h, eps, opts.lipschitz_seed)?;
        analytic &= a;
        let q = c * ell;
        let delta = (q < 1.0).then(|| eps * (1.0 - q) / w);
        scan.push(EpsPoint {
            eps,
            ell_h: ell,
            q,
            delta,
        });
    }
    let best = scan
        .iter()
        .filter(|p| p.q < 1.0)
        .max_by(|a, b| a.eps.total_cmp(&b.eps))
        .copied();
    let Some(best) = best else {
        let smallest = scan
            .iter()
            .min_by(|a, b| a.eps.total_cmp(&b.eps))
            .copied()
            .expect("grid is nonempty");
        return Err(AnalysisError::NoContraction {
            best_q: smallest.q,
            eps: smallest.eps,
        });
    };
    let delta = best.delta.expect("q < 1");
    Ok(StabilityConstants {
        c_alpha_lambda: c,
        eps: best.eps,
        q: best.q,
        delta,
        ell_h: best.ell_h,
        sup_weight: w,
        eps_x: best.eps * h.transform_norm(),
        delta_x: delta / h.inverse_norm(),
        gamma: spec.gamma,
        analytic_lipschitz: analytic,
        eigenvalues: eig,
        eps_scan: scan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{JordanBlock, JordanStructure, SystemMatrix};
    use crate::nonlinearity::{NonlinearityKind, NonlinearitySpec};
    use crate::solver::HistoryFunction;
    use nalgebra::DMatrix;

    fn scalar(lambda: f64, g: NonlinearitySpec) -> DelaySystemSpec {
        DelaySystemSpec::new(
            0.5,
            1.0,
            SystemMatrix::diagonal(&[Complex64::new(lambda, 0.0)]).unwrap(),
            g,
            HistoryFunction::constant_real(&[0.0]),
            1.0,
            0.01,
        )
    }

    #[test]
    fn zero_nonlinearity_gives_zero_q() {
        let c = compute_constants(&scalar(-1.0, NonlinearitySpec::zero()), &[], &ConstantsOptions::default())
            .unwrap();
        assert_eq!(c.q, 0.0);
        assert_eq!(c.eps, 1.0);
        assert!((c.delta - c.eps / c.sup_weight).abs() < 1e-15);
        assert!(c.sup_weight >= 2.0);
        assert_eq!(c.eps_x, c.eps);
        assert_eq!(c.delta_x, c.delta);
    }

    #[test]
    fn quadratic_example() {
        let g = NonlinearitySpec::new(NonlinearityKind::Quadratic, vec![0.05]);
        let c = compute_constants(&scalar(-1.0, g), &[], &ConstantsOptions::default()).unwrap();
        for p in &c.eps_scan {
            assert!((p.ell_h - 0.1 * p.eps).abs() < 1e-15);
            assert!(p.q < 1.0);
        }
        assert_eq!(c.eps, 1.0);
        assert!((c.q - 0.1 * c.c_alpha_lambda).abs() < 1e-12);
        assert!(c.c_alpha_lambda > 1.0 && c.c_alpha_lambda < 10.0, "{}", c.c_alpha_lambda);
        assert!(c.delta > 0.0 && c.delta < c.eps);
        // δ(ε) = ε(1 − Cℓ₁ε)/W increases while q ≤ 1/2.
        let mono: Vec<f64> = c
            .eps_scan
            .iter()
            .filter(|p| p.q <= 0.5)
            .map(|p| p.delta.unwrap())
            .collect();
        assert!(mono.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn outside_region_is_rejected() {
        let r = compute_constants(&scalar(1.0, NonlinearitySpec::zero()), &[], &ConstantsOptions::default());
        assert!(matches!(r, Err(AnalysisError::OutsideRegion { .. })));
    }

    #[test]
    fn huge_gamma_on_a_jordan_block_does_not_contract() {
        let lam = Complex64::new(-1.0, 0.0);
        let a = SystemMatrix::from_real_rows(&[vec![-1.0, 1.0], vec![0.0, -1.0]]).unwrap();
        let mut spec = DelaySystemSpec::new(
            0.5,
            1.0,
            a,
            NonlinearitySpec::zero(),
            HistoryFunction::zero(2),
            1.0,
            0.01,
        );
        spec.jordan = Some(JordanStructure {
            blocks: vec![JordanBlock { lambda: lam, size: 2, eta: 1 }],
            transform: DMatrix::identity(2, 2),
        });
        spec.gamma = 100.0;
        let r = compute_constants(&spec, &[], &ConstantsOptions::default());
        assert!(matches!(r, Err(AnalysisError::NoContraction { .. })), "{r:?}");
        spec.gamma = 1e-3;
        let c = compute_constants(&spec, &[], &ConstantsOptions::default()).unwrap();
        assert!((c.ell_h - 1e-3).abs() < 1e-15);
    }
}
