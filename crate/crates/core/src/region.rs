//! The stability region
//!
//! ```text
//! S_{α,τ} = { λ ∈ ℂ∖{0} : απ/2 < |arg λ| ≤ π,  |λ| < ((|arg λ| − απ/2)/τ)^α }
//! ```
//!
//! together with an independent check: counting zeros of the characteristic function
//! `s^α − λ e^{−τs}` in a right-half-plane rectangle with the argument principle.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{principal_arg, principal_pow};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParams { name: &'static str, reason: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    /// A zero may lie within `margin` of the contour; move the window and retry.
    #[error("characteristic function nearly vanishes on the contour at s = {s} (|f| = {value:.3e})")]
    ContourTooClose { s: Complex64, value: f64 },
    #[error("contour refinement did not resolve the phase near s = {s}")]
    RefinementLimit { s: Complex64 },
}

/// Order and delay defining `S_{α,τ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionParams {
    pub alpha: f64,
    pub tau: f64,
}

impl RegionParams {
    pub fn new(alpha: f64, tau: f64) -> Result<Self, RegionError> {
        let p = RegionParams { alpha, tau };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), RegionError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(RegionError::InvalidParams {
                name: "alpha",
                reason: format!("must lie in (0, 1), got {}", self.alpha),
            });
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(RegionError::InvalidParams {
                name: "tau",
                reason: format!("must be finite and > 0, got {}", self.tau),
            });
        }
        Ok(())
    }

    /// Boundary radius `((θ − απ/2)/τ)^α` for `θ ∈ (απ/2, π]`.
    pub fn threshold_radius(&self, theta: f64) -> f64 {
        ((theta - self.alpha * FRAC_PI_2) / self.tau).powf(self.alpha)
    }
}

/// Membership of one eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionVerdict {
    pub member: bool,
    /// `threshold_radius − |λ|` when the argument condition holds, `−|λ|` otherwise.
    pub margin_to_boundary: f64,
    pub arg_ok: bool,
}

/// Decides `λ ∈ S_{α,τ}` with the printed inequality.
pub fn in_region(lambda: Complex64, p: &RegionParams) -> RegionVerdict {
    let r = lambda.norm();
    if r == 0.0 {
        return RegionVerdict {
            member: false,
            margin_to_boundary: 0.0,
            arg_ok: false,
        };
    }
    let theta = principal_arg(lambda).abs();
    let arg_ok = theta > p.alpha * FRAC_PI_2;
    if !arg_ok {
        return RegionVerdict {
            member: false,
            margin_to_boundary: -r,
            arg_ok,
        };
    }
    let margin = p.threshold_radius(theta) - r;
    RegionVerdict {
        member: margin > 0.0,
        margin_to_boundary: margin,
        arg_ok,
    }
}

/// One point of the upper boundary branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySample {
    pub theta: f64,
    pub radius: f64,
    pub point: Complex64,
}

/// `n` points `θ_i = απ/2 + (π − απ/2)(i + 1)/n`, `i = 0..n`, on the upper boundary
/// branch; the last one is `θ = π`. The lower branch is the conjugate.
pub fn boundary_samples(p: &RegionParams, n: usize) -> Result<Vec<BoundarySample>, RegionError> {
    p.validate()?;
    if n < 2 {
        return Err(RegionError::Domain(format!("need n >= 2 samples, got {n}")));
    }
    let theta0 = p.alpha * FRAC_PI_2;
    Ok((0..n)
        .map(|i| {
            let theta = if i + 1 == n {
                PI
            } else {
                theta0 + (PI - theta0) * (i + 1) as f64 / n as f64
            };
            let radius = p.threshold_radius(theta);
            BoundarySample {
                theta,
                radius,
                point: Complex64::from_polar(radius, theta),
            }
        })
        .collect())
}

/// `s^α − λ e^{−τs}` with the principal branch of `s^α`.
pub fn char_function(s: Complex64, lambda: Complex64, p: &RegionParams) -> Result<Complex64, RegionError> {
    if s == Complex64::new(0.0, 0.0) {
        return Err(RegionError::Domain("s^alpha is not evaluated at s = 0".into()));
    }
    Ok(eval_char(s, lambda, p))
}

fn eval_char(s: Complex64, lambda: Complex64, p: &RegionParams) -> Complex64 {
    principal_pow(s, p.alpha) - lambda * (-p.tau * s).exp()
}

/// Closed rectangle `[re_min, re_max] × [im_min, im_max]` and the minimum admissible
/// distance of any zero to its boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootCountWindow {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub margin: f64,
}

impl RootCountWindow {
    pub fn validate(&self) -> Result<(), RegionError> {
        let vals = [self.re_min, self.re_max, self.im_min, self.im_max, self.margin];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(RegionError::InvalidWindow("non-finite bound".into()));
        }
        if !(self.re_min < self.re_max) || !(self.im_min < self.im_max) {
            return Err(RegionError::InvalidWindow(format!(
                "empty rectangle [{}, {}] x [{}, {}]",
                self.re_min, self.re_max, self.im_min, self.im_max
            )));
        }
        if !(self.margin > 0.0) {
            return Err(RegionError::InvalidWindow("margin must be > 0".into()));
        }
        if !(self.re_min > 0.0) {
            return Err(RegionError::InvalidWindow(
                "window must lie in the open right half-plane (re_min > 0)".into(),
            ));
        }
        Ok(())
    }

    /// Splits at `Re s = x` into a left and a right rectangle sharing an edge.
    pub fn split_vertical(&self, x: f64) -> (RootCountWindow, RootCountWindow) {
        (
            RootCountWindow { re_max: x, ..*self },
            RootCountWindow { re_min: x, ..*self },
        )
    }
}

/// A window that contains every zero with `Re s ≥ re_min`.
///
/// For `Re s ≥ 0` one has `|λ e^{−τs}| ≤ |λ|`, so any zero satisfies `|s| ≤ |λ|^{1/α}`;
/// the right edge `R = max(2, (|λ|e)^{1/α} + 1)` and half-height `min(R·tan(π/2 − 0.01),
/// 10R)` are therefore comfortably large. The left edge sits well below the modulus
/// `|λ|^{1/α}` of the small zeros that appear when `λ` is near the origin, so a zero
/// that has just crossed the imaginary axis is still inside.
pub fn stability_window(lambda: Complex64, p: &RegionParams) -> RootCountWindow {
    let r = lambda.norm();
    let big = (r * std::f64::consts::E).powf(1.0 / p.alpha) + 1.0;
    let re_max = big.max(2.0);
    let im = (re_max * (FRAC_PI_2 - 0.01).tan()).min(10.0 * re_max);
    let small = if r > 0.0 { r.powf(1.0 / p.alpha) } else { 1.0 };
    let re_min = (1e-3 * small).clamp(1e-12, 0.01);
    RootCountWindow {
        re_min,
        re_max,
        im_min: -im,
        im_max: im,
        margin: 0.5 * re_min,
    }
}

/// Number of zeros of `s^α − λe^{−τs}` inside the window (argument principle).
pub fn count_roots(lambda: Complex64, p: &RegionParams, w: &RootCountWindow) -> Result<usize, RegionError> {
    p.validate()?;
    w.validate()?;
    if lambda == Complex64::new(0.0, 0.0) {
        return Ok(0);
    }
    let corners = [
        Complex64::new(w.re_min, w.im_min),
        Complex64::new(w.re_max, w.im_min),
        Complex64::new(w.re_max, w.im_max),
        Complex64::new(w.re_min, w.im_max),
    ];
    let mut total = 0.0;
    for i in 0..4 {
        total += edge_phase(lambda, p, w.margin, corners[i], corners[(i + 1) % 4])?;
    }
    let winding = total / (2.0 * PI);
    let rounded = winding.round();
    if (winding - rounded).abs() > 1e-3 || rounded < 0.0 {
        return Err(RegionError::RefinementLimit { s: corners[0] });
    }
    Ok(rounded as usize)
}

/// Counts right-half-plane zeros in [`stability_window`], nudging the window when a
/// zero sits too close to its boundary.
pub fn count_unstable_roots(lambda: Complex64, p: &RegionParams) -> Result<usize, RegionError> {
    let mut w = stability_window(lambda, p);
    let mut last = None;
    for _ in 0..6 {
        match count_roots(lambda, p, &w) {
            Err(e @ RegionError::ContourTooClose { .. }) => {
                log::debug!("retrying root count with a shifted window: {e}");
                last = Some(e);
                w.re_min *= 0.61;
                w.margin = 0.5 * w.re_min;
                w.re_max *= 1.13;
                w.im_min *= 1.07;
                w.im_max *= 1.07;
            }
            other => return other,
        }
    }
    Err(last.expect("loop ran at least once"))
}

/// Minimal `|f|` compatible with no zero within `margin` of `s`: a bound on `|f'|`
/// over the margin-disk times the margin.
fn closeness_floor(s: Complex64, lambda: Complex64, p: &RegionParams, margin: f64) -> f64 {
    let rad = (s.norm() - margin).max(1e-300);
    let d_pow = p.alpha * rad.powf(p.alpha - 1.0);
    let d_exp = lambda.norm() * p.tau * (-p.tau * (s.re - margin)).exp();
    margin * (d_pow + d_exp)
}

fn edge_phase(
    lambda: Complex64,
    p: &RegionParams,
    margin: f64,
    a: Complex64,
    b: Complex64,
) -> Result<f64, RegionError> {
    let len = (b - a).norm();
    let n = ((p.tau * len * 4.0).ceil() as usize + 32).min(1 << 16);
    let point = |u: f64| a + (b - a) * u;
    let sample = |u: f64| -> Result<Complex64, RegionError> {
        let s = point(u);
        let f = eval_char(s, lambda, p);
        let floor = closeness_floor(s, lambda, p, margin);
        if !(f.norm() >= floor) {
            return Err(RegionError::ContourTooClose { s, value: f.norm() });
        }
        Ok(f)
    };
    let mut total = 0.0;
    let mut u0 = 0.0;
    let mut f0 = sample(0.0)?;
    for i in 1..=n {
        let u1 = i as f64 / n as f64;
        let f1 = sample(u1)?;
        total += segment_phase(&sample, &point, u0, f0, u1, f1, 0)?;
        u0 = u1;
        f0 = f1;
    }
    Ok(total)
}

fn phase_step(f0: Complex64, f1: Complex64) -> f64 {
    (f1 / f0).arg()
}

#[allow(clippy::too_many_arguments)]
fn segment_phase<S, P>(
    sample: &S,
    point: &P,
    u0: f64,
    f0: Complex64,
    u1: f64,
    f1: Complex64,
    depth: u32,
) -> Result<f64, RegionError>
where
    S: Fn(f64) -> Result<Complex64, RegionError>,
    P: Fn(f64) -> Complex64,
{
    let d = phase_step(f0, f1);
    let um = 0.5 * (u0 + u1);
    let fm = sample(um)?;
    let d1 = phase_step(f0, fm);
    let d2 = phase_step(fm, f1);
    if d.abs() < FRAC_PI_2 && (d1 + d2 - d).abs() < 1e-9 {
        return Ok(d);
    }
    if depth >= 48 {
        return Err(RegionError::RefinementLimit { s: point(um) });
    }
    Ok(segment_phase(sample, point, u0, f0, um, fm, depth + 1)?
        + segment_phase(sample, point, um, fm, u1, f1, depth + 1)?)
}
