//! Nonlinear terms `g(x, y)` with `g(0, 0) = 0`, where `x` is the current state and
//! `y` the delayed one.
//!
//! Lipschitz moduli refer to the max-norm and the sum denominator
//! `‖x − x̂‖ + ‖y − ŷ‖` on the ball `‖x‖, ‖y‖, ‖x̂‖, ‖ŷ‖ ≤ ρ`. The built-in families are
//! componentwise and are evaluated on complex arguments, since the diagonalised
//! system works in complex coordinates; their bounds hold for complex arguments too.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A nonlinearity acting on `d`-vectors.
pub trait Nonlinearity: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `g(x, y)` into `out`; all slices have length [`Nonlinearity::dim`].
    fn eval(&self, x: &[Complex64], y: &[Complex64], out: &mut [Complex64]);

    /// Analytic upper bound for `ℓ_g(ρ)`, if one is known.
    fn lipschitz_bound(&self, rho: f64) -> Option<f64>;

    /// Whether `ℓ_g(ρ) → 0` as `ρ → 0`.
    fn satisfies_h2(&self) -> bool;
}

/// Built-in families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    /// `g ≡ 0`.
    Zero,
    /// `g_i = c_x x_i² + c_y y_i²`, params `[c_x]` or `[c_x, c_y]`.
    Quadratic,
    /// `g_i = c_x x_i³ + c_y y_i³`, params `[c_x]` or `[c_x, c_y]`.
    Cubic,
    /// `g_i = c_x (sin x_i − x_i) + c_y (sin y_i − y_i)`, params `[c_x]` or `[c_x, c_y]`.
    Sine,
    /// `g = B y` with `B` given row-major by `d²` params. Linear, so `ℓ_g` does not
    /// vanish at 0; useful as a perturbation of the delay matrix.
    LinearPerturb,
}

impl fmt::Display for NonlinearityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NonlinearityKind::Zero => "zero",
            NonlinearityKind::Quadratic => "quadratic",
            NonlinearityKind::Cubic => "cubic",
            NonlinearityKind::Sine => "sine",
            NonlinearityKind::LinearPerturb => "linear_perturb",
        };
        f.write_str(s)
    }
}

/// A built-in nonlinearity: family plus coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub kind: NonlinearityKind,
    #[serde(default)]
    pub params: Vec<f64>,
}

/// Rejected coefficient lists.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("nonlinearity `{kind}`: {reason}")]
pub struct NonlinearityError {
    pub kind: NonlinearityKind,
    pub reason: String,
}

impl NonlinearitySpec {
    pub fn zero() -> Self {
        NonlinearitySpec {
            kind: NonlinearityKind::Zero,
            params: Vec::new(),
        }
    }

    pub fn new(kind: NonlinearityKind, params: Vec<f64>) -> Self {
        NonlinearitySpec { kind, params }
    }

    /// Coefficients `(c_x, c_y)` of the componentwise families.
    fn pair(&self) -> Result<(f64, f64), NonlinearityError> {
        match self.params.as_slice() {
            [cx] => Ok((*cx, 0.0)),
            [cx, cy] => Ok((*cx, *cy)),
            other => Err(NonlinearityError {
                kind: self.kind,
                reason: format!("expected 1 or 2 coefficients, got {}", other.len()),
            }),
        }
    }

    /// Checks the coefficients for dimension `dim`.
    pub fn validate(&self, dim: usize) -> Result<(), NonlinearityError> {
        if self.params.iter().any(|c| !c.is_finite()) {
            return Err(NonlinearityError {
                kind: self.kind,
                reason: "coefficients must be finite".into(),
            });
        }
        match self.kind {
            NonlinearityKind::Zero => {
                if !self.params.is_empty() {
                    return Err(NonlinearityError {
                        kind: self.kind,
                        reason: "takes no coefficients".into(),
                    });
                }
            }
            NonlinearityKind::Quadratic | NonlinearityKind::Cubic | NonlinearityKind::Sine => {
                self.pair()?;
            }
            NonlinearityKind::LinearPerturb => {
                if self.params.len() != dim * dim {
                    return Err(NonlinearityError {
                        kind: self.kind,
                        reason: format!(
                            "expected {} row-major entries for d = {dim}, got {}",
                            dim * dim,
                            self.params.len()
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Analytic bound for `ℓ_g(ρ)`.
    pub fn lipschitz_bound(&self, dim: usize, rho: f64) -> Result<f64, NonlinearityError> {
        self.validate(dim)?;
        Ok(match self.kind {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::Quadratic => {
                let (cx, cy) = self.pair()?;
                2.0 * rho * cx.abs().max(cy.abs())
            }
            NonlinearityKind::Cubic => {
                let (cx, cy) = self.pair()?;
                3.0 * rho * rho * cx.abs().max(cy.abs())
            }
            NonlinearityKind::Sine => {
                let (cx, cy) = self.pair()?;
                // |cos z − 1| ≤ cosh|z| − 1 on |z| ≤ ρ.
                cx.abs().max(cy.abs()) * (rho.cosh() - 1.0)
            }
            NonlinearityKind::LinearPerturb => (0..dim)
                .map(|i| self.params[i * dim..(i + 1) * dim].iter().map(|b| b.abs()).sum::<f64>())
                .fold(0.0, f64::max),
        })
    }

    pub fn satisfies_h2(&self) -> bool {
        self.kind != NonlinearityKind::LinearPerturb
    }

    /// Builds an evaluable nonlinearity for dimension `dim`.
    pub fn build(&self, dim: usize) -> Result<Arc<dyn Nonlinearity>, NonlinearityError> {
        self.validate(dim)?;
        Ok(Arc::new(BuiltIn {
            spec: self.clone(),
            dim,
        }))
    }
}

#[derive(Debug, Clone)]
struct BuiltIn {
    spec: NonlinearitySpec,
    dim: usize,
}

impl Nonlinearity for BuiltIn {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[Complex64], y: &[Complex64], out: &mut [Complex64]) {
        let d = self.dim;
        let (cx, cy) = self.spec.pair().unwrap_or((0.0, 0.0));
        match self.spec.kind {
            NonlinearityKind::Zero => out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0)),
            NonlinearityKind::Quadratic => {
                for i in 0..d {
                    out[i] = x[i] * x[i] * cx + y[i] * y[i] * cy;
                }
            }
            NonlinearityKind::Cubic => {
                for i in 0..d {
                    out[i] = x[i] * x[i] * x[i] * cx + y[i] * y[i] * y[i] * cy;
                }
            }
            NonlinearityKind::Sine => {
                for i in 0..d {
                    out[i] = (sin_minus_id(x[i])) * cx + (sin_minus_id(y[i])) * cy;
                }
            }
            NonlinearityKind::LinearPerturb => {
                for i in 0..d {
                    let row = &self.spec.params[i * d..(i + 1) * d];
                    out[i] = row.iter().zip(y).map(|(b, yj)| yj * *b).sum();
                }
            }
        }
    }

    fn lipschitz_bound(&self, rho: f64) -> Option<f64> {
        self.spec.lipschitz_bound(self.dim, rho).ok()
    }

    fn satisfies_h2(&self) -> bool {
        self.spec.satisfies_h2()
    }
}

/// `sin z − z`, using the Taylor series near 0 to avoid cancellation.
fn sin_minus_id(z: Complex64) -> Complex64 {
    if z.norm() < 0.1 {
        let z2 = z * z;
        // −z³/6 + z⁵/120 − z⁷/5040 + z⁹/362880
        z * z2 * (-1.0 / 6.0 + z2 * (1.0 / 120.0 + z2 * (-1.0 / 5040.0 + z2 / 362_880.0)))
    } else {
        z.sin() - z
    }
}

/// A user-supplied nonlinearity from a closure, with an optional analytic bound.
/// Without a bound, Lipschitz moduli are estimated by sampling.
pub struct FnNonlinearity<F> {
    dim: usize,
    f: F,
    bound: Option<fn(f64) -> f64>,
    h2: bool,
}

impl<F> FnNonlinearity<F>
where
    F: Fn(&[Complex64], &[Complex64], &mut [Complex64]) + Send + Sync,
{
    pub fn new(dim: usize, f: F, bound: Option<fn(f64) -> f64>, h2: bool) -> Self {
        FnNonlinearity { dim, f, bound, h2 }
    }
}

impl<F> Nonlinearity for FnNonlinearity<F>
where
    F: Fn(&[Complex64], &[Complex64], &mut [Complex64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[Complex64], y: &[Complex64], out: &mut [Complex64]) {
        (self.f)(x, y, out)
    }

    fn lipschitz_bound(&self, rho: f64) -> Option<f64> {
        self.bound.map(|b| b(rho))
    }

    fn satisfies_h2(&self) -> bool {
        self.h2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn every_builtin_vanishes_at_origin() {
        let specs = [
            NonlinearitySpec::zero(),
            NonlinearitySpec::new(NonlinearityKind::Quadratic, vec![0.3, -0.2]),
            NonlinearitySpec::new(NonlinearityKind::Cubic, vec![1.0]),
            NonlinearitySpec::new(NonlinearityKind::Sine, vec![0.5, 0.5]),
            NonlinearitySpec::new(NonlinearityKind::LinearPerturb, vec![0.1, 0.0, 0.0, 0.2]),
        ];
        for s in specs {
            let g = s.build(2).unwrap();
            let mut out = [c(7.0); 2];
            g.eval(&[c(0.0); 2], &[c(0.0); 2], &mut out);
            assert_eq!(out, [c(0.0); 2], "{}", s.kind);
        }
    }

    #[test]
    fn analytic_bounds() {
        let q = NonlinearitySpec::new(NonlinearityKind::Quadratic, vec![1.0]);
        assert!((q.lipschitz_bound(1, 0.1).unwrap() - 0.2).abs() < 1e-15);
        let sym = NonlinearitySpec::new(NonlinearityKind::Quadratic, vec![-0.4, 0.4]);
        assert!((sym.lipschitz_bound(1, 0.5).unwrap() - 0.4).abs() < 1e-15);
        let z = NonlinearitySpec::zero();
        assert_eq!(z.lipschitz_bound(3, 10.0).unwrap(), 0.0);
        let b = NonlinearitySpec::new(NonlinearityKind::LinearPerturb, vec![1.0, -2.0, 0.5, 0.5]);
        assert_eq!(b.lipschitz_bound(2, 0.01).unwrap(), 3.0);
        assert_eq!(b.lipschitz_bound(2, 100.0).unwrap(), 3.0);
        assert!(!b.satisfies_h2());
    }

    #[test]
    fn sine_series_matches_library_away_from_zero() {
        let z = Complex64::new(0.09, 0.02);
        let direct = z.sin() - z;
        assert!((sin_minus_id(z) - direct).norm() < 1e-15);
    }

    #[test]
    fn bad_coefficients_are_rejected() {
        let s = NonlinearitySpec::new(NonlinearityKind::LinearPerturb, vec![1.0, 2.0]);
        assert!(s.build(2).is_err());
        let s = NonlinearitySpec::new(NonlinearityKind::Cubic, vec![]);
        assert!(s.build(1).is_err());
        let s = NonlinearitySpec::new(NonlinearityKind::Zero, vec![1.0]);
        assert!(s.build(1).is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let s = NonlinearitySpec::new(NonlinearityKind::LinearPerturb, vec![0.5]);
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"linear_perturb\""));
        let back: NonlinearitySpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}
