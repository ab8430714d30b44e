//! Power-law decay fits of the delayed Mittag-Leffler function.

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::mlfunc::{EvalPolicy, MlParams};
use crate::region::{in_region, RegionParams};

/// Number of geometrically spaced sample points of a fit.
pub const DECAY_FIT_POINTS: usize = 25;

/// Least-squares fit `log|E(t)| ≈ slope·log t + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `y` on `x`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> Option<DecayFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Some(DecayFit {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

/// Slope of `log|E^{λ,τ}_{α,β}(t)|` against `log t` on [`DECAY_FIT_POINTS`]
/// geometrically spaced points of `[t_lo, t_hi]`.
///
/// Expected slopes for `λ ∈ S_{α,τ}` are `−(α+1)` for `β = α` and `−α` for `β = 1`.
pub fn decay_fit(p: &MlParams, t_lo: f64, t_hi: f64) -> Result<DecayFit, AnalysisError> {
    p.validate()?;
    if !(t_lo >= 1.0) || !(t_hi > t_lo) || !t_hi.is_finite() {
        return Err(AnalysisError::Domain(format!(
            "need 1 <= t_lo < t_hi < inf, got [{t_lo}, {t_hi}]"
        )));
    }
    let verdict = in_region(p.lambda, &RegionParams { alpha: p.alpha, tau: p.tau });
    if !verdict.member {
        return Err(AnalysisError::OutsideRegion {
            lambda: p.lambda,
            margin: verdict.margin_to_boundary,
        });
    }
    let kernel = p.kernel(t_hi, EvalPolicy::default())?;
    let ratio = t_hi / t_lo;
    let last = (DECAY_FIT_POINTS - 1) as f64;
    let mut xs = Vec::with_capacity(DECAY_FIT_POINTS);
    let mut ys = Vec::with_capacity(DECAY_FIT_POINTS);
    for i in 0..DECAY_FIT_POINTS {
        let t = if i + 1 == DECAY_FIT_POINTS {
            t_hi
        } else {
            t_lo * ratio.powf(i as f64 / last)
        };
        let v = kernel.eval(t)?.norm();
        if !(v > 0.0) {
            return Err(AnalysisError::Domain(format!("|E({t})| = 0; log fit undefined")));
        }
        xs.push(t.ln());
        ys.push(v.ln());
    }
    linear_fit(&xs, &ys).ok_or_else(|| AnalysisError::Domain("degenerate fit grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn exact_power_law_is_recovered() {
        let x: Vec<f64> = (1..10).map(|i| (i as f64).ln()).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 1.5 * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-14);
        assert!((f.intercept - 2.0).abs() < 1e-13);
        assert!((f.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn slopes_of_the_reference_cases() {
        let lam = Complex64::new(-1.0, 0.0);
        let fa = decay_fit(&MlParams::new(0.5, 0.5, lam, 1.0).unwrap(), 20.0, 200.0).unwrap();
        assert!((fa.slope + 1.5).abs() <= 0.15, "{fa:?}");
        let f1 = decay_fit(&MlParams::new(0.5, 1.0, lam, 1.0).unwrap(), 20.0, 200.0).unwrap();
        assert!((f1.slope + 0.5).abs() <= 0.15, "{f1:?}");
        let p = MlParams::new(0.8, 0.8, Complex64::new(-0.5, 0.0), 0.5).unwrap();
        let f8 = decay_fit(&p, 20.0, 200.0).unwrap();
        assert!((f8.slope + 1.8).abs() <= 0.15, "{f8:?}");
    }

    #[test]
    fn bad_ranges_and_unstable_lambda() {
        let p = MlParams::new(0.5, 1.0, Complex64::new(-1.0, 0.0), 1.0).unwrap();
        assert!(matches!(decay_fit(&p, 0.5, 10.0), Err(AnalysisError::Domain(_))));
        assert!(matches!(decay_fit(&p, 10.0, 10.0), Err(AnalysisError::Domain(_))));
        let q = MlParams::new(0.5, 1.0, Complex64::new(1.0, 0.0), 1.0).unwrap();
        assert!(matches!(
            decay_fit(&q, 20.0, 200.0),
            Err(AnalysisError::OutsideRegion { .. })
        ));
    }
}
