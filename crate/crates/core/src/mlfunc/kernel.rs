//! Series evaluation of `E^{λ,τ}_{α,β}` with a double-precision fast path and an
//! MPFR fallback for the regime where the alternating terms cancel.
//!
//! The series is finite for every `t`, so accuracy is purely a rounding question. The
//! term magnitudes grow like `exp(c·t)` while the sum stays bounded for stable `λ`;
//! at `t = 200` the largest term can reach `1e56`. The double path is used while
//! `Σ|term|·2⁻⁵⁰` stays below the policy tolerance, otherwise the sum is recomputed
//! with enough bits to absorb the cancellation. Exponents `αk + β − 1` and the
//! Gamma arguments are formed in the working precision: rounding them to `f64` first
//! perturbs a `1e22` term by `1e8`.

use num_complex::Complex64;
use rug::{Assign, Float};

use super::{EvalPolicy, MlError};
use crate::complex::CompensatedSum;

const LN_MAX: f64 = 709.0;

#[derive(Debug, Clone)]
struct Term {
    exponent: f64,
    /// `ln|λ^k / Γ(αk + β)|`, `-inf` at a Gamma pole.
    ln_mag: f64,
    phase: f64,
    direct: Option<Complex64>,
}

enum Attempt {
    Done(Complex64),
    NeedsBits(u32),
}

#[derive(Debug, Clone)]
struct MpTable {
    prec: u32,
    c_re: Vec<Float>,
    c_im: Vec<Float>,
    exponent: Vec<Float>,
}

/// A prepared evaluator for one parameter set `(α, β, λ, τ)` on `[0, t_max]`.
///
/// Coefficients `λ^k / Γ(αk + β)` are computed once; an extended-precision table is
/// built up front when `t_max` is already in the cancellation regime. The kernel is
/// immutable after construction and can be shared across threads.
#[derive(Debug, Clone)]
pub struct MlKernel {
    alpha: f64,
    beta: f64,
    lambda: Complex64,
    tau: f64,
    policy: EvalPolicy,
    terms: Vec<Term>,
    mp: Option<MpTable>,
}

/// `ln|Γ(x)|` and the sign of `Γ(x)`; `None` at the poles `x ∈ {0, −1, −2, …}`.
pub(crate) fn ln_gamma_signed(x: f64) -> Option<(f64, f64)> {
    if x > 0.0 {
        return Some((statrs::function::gamma::ln_gamma(x), 1.0));
    }
    if x == x.floor() {
        return None;
    }
    let s = (std::f64::consts::PI * x).sin();
    let lg = std::f64::consts::PI.ln() - s.abs().ln() - statrs::function::gamma::ln_gamma(1.0 - x);
    Some((lg, s.signum()))
}

/// `r·e^{iφ}`; for real `λ` every phase is a multiple of `π`, and the result is kept
/// exactly real.
fn polar(r: f64, phase: f64, real: bool) -> Complex64 {
    if real {
        Complex64::new(r * phase.cos().round(), 0.0)
    } else {
        Complex64::from_polar(r, phase)
    }
}

impl MlKernel {
    /// Builds a kernel valid on `[0, t_max]`. `λ = 0` is accepted here (the series
    /// collapses to its first term) even though [`super::MlParams`] rejects it.
    pub fn new(
        alpha: f64,
        beta: f64,
        lambda: Complex64,
        tau: f64,
        t_max: f64,
        policy: EvalPolicy,
    ) -> Result<Self, MlError> {
        if !(alpha > 0.0 && alpha < 1.0) || !(tau > 0.0) || !beta.is_finite() {
            return Err(MlError::InvalidParams {
                name: "alpha/tau/beta",
                reason: format!("alpha={alpha}, tau={tau}, beta={beta}"),
            });
        }
        if !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(MlError::InvalidParams {
                name: "lambda",
                reason: "non-finite".into(),
            });
        }
        if !(t_max >= 0.0) || !t_max.is_finite() {
            return Err(MlError::Domain(format!("t_max must be finite and >= 0, got {t_max}")));
        }
        let k_max = (t_max / tau).floor() as usize;
        if lambda == Complex64::new(0.0, 0.0) {
            // Only the k = 0 term survives.
        } else if k_max + 1 > policy.max_terms {
            return Err(MlError::TermLimit {
                needed: k_max + 1,
                max_terms: policy.max_terms,
            });
        }
        let n_terms = if lambda == Complex64::new(0.0, 0.0) {
            1
        } else {
            k_max + 1
        };
        let ln_abs_lambda = lambda.norm().ln();
        let arg_lambda = crate::complex::principal_arg(lambda);
        let real = lambda.im == 0.0;
        let terms = (0..n_terms)
            .map(|k| {
                let kf = k as f64;
                let g = alpha * kf + beta;
                let (ln_mag, phase) = match ln_gamma_signed(g) {
                    None => (f64::NEG_INFINITY, 0.0),
                    Some((lg, sign)) => {
                        let lm = if k == 0 { -lg } else { kf * ln_abs_lambda - lg };
                        let ph = kf * arg_lambda + if sign < 0.0 { std::f64::consts::PI } else { 0.0 };
                        (lm, ph)
                    }
                };
                let direct = if ln_mag > -LN_MAX && ln_mag < LN_MAX {
                    Some(polar(ln_mag.exp(), phase, real))
                } else {
                    None
                };
                Term {
                    exponent: g - 1.0,
                    ln_mag,
                    phase,
                    direct,
                }
            })
            .collect();
        let mut kernel = MlKernel {
            alpha,
            beta,
            lambda,
            tau,
            policy,
            terms,
            mp: None,
        };
        if n_terms > 1 {
            let knot = k_max;
            let offset = (t_max - knot as f64 * tau).max(0.0);
            let probe = [offset, 0.5 * tau, 0.999 * tau];
            let bits = probe
                .iter()
                .filter_map(|&off| kernel.required_bits(knot, off))
                .max();
            if let Some(bits) = bits {
                kernel.mp = Some(kernel.build_table(bits + 8, n_terms));
            }
        }
        Ok(kernel)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Evaluates `E(t)` for `t > 0` from the series; `t = 0` returns the pointwise
    /// convention value 1.
    pub fn eval(&self, t: f64) -> Result<Complex64, MlError> {
        if t < 0.0 || t.is_nan() {
            return Err(MlError::Domain(format!("t must be >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let knot = (t / self.tau).floor() as usize;
        let offset = (t - knot as f64 * self.tau).max(0.0);
        self.eval_point(knot, offset)
    }

    /// The series value at `t = knot·τ + offset`, with no special case at `t = 0`.
    /// Splitting `t` this way keeps `t − kτ` exact on delay-aligned grids.
    pub fn eval_point(&self, knot: usize, offset: f64) -> Result<Complex64, MlError> {
        match self.eval_double(knot, offset)? {
            Attempt::Done(v) => Ok(v),
            Attempt::NeedsBits(bits) => self.eval_mp(knot, offset, bits),
        }
    }

    /// The double-precision sum, or the precision needed when cancellation is too
    /// severe for it.
    fn eval_double(&self, knot: usize, offset: f64) -> Result<Attempt, MlError> {
        let t = knot as f64 * self.tau + offset;
        let n = (knot + 1).min(self.terms.len());
        if knot >= self.terms.len() && self.lambda != Complex64::new(0.0, 0.0) {
            return Err(MlError::Domain(format!("t = {t} beyond the kernel range")));
        }
        let mut sum = CompensatedSum::default();
        let mut max_ln = f64::NEG_INFINITY;
        for k in 0..n {
            let term = &self.terms[k];
            let x = (knot - k) as f64 * self.tau + offset;
            if term.ln_mag == f64::NEG_INFINITY {
                continue;
            }
            if x == 0.0 {
                if term.exponent == 0.0 {
                    sum.add(term.direct.unwrap_or_default());
                    max_ln = max_ln.max(term.ln_mag);
                } else if term.exponent < 0.0 {
                    return Err(MlError::Singular { t });
                }
                continue;
            }
            let lx = x.ln();
            let ln_term = term.ln_mag + term.exponent * lx;
            if ln_term > LN_MAX {
                return Err(MlError::Overflow { t });
            }
            max_ln = max_ln.max(ln_term);
            let value = match term.direct {
                Some(c) if (term.exponent * lx).abs() < LN_MAX => c * x.powf(term.exponent),
                _ if ln_term < -745.0 => Complex64::new(0.0, 0.0),
                _ => polar(ln_term.exp(), term.phase, self.lambda.im == 0.0),
            };
            sum.add(value);
        }
        let value = sum.value();
        if max_ln == f64::NEG_INFINITY {
            return Ok(Attempt::Done(value));
        }
        let ln2 = std::f64::consts::LN_2;
        let log2_s = max_ln / ln2 + (n as f64).log2();
        let allowed = self.policy.abs_tol.log2() + value.norm().max(1.0).log2();
        if log2_s - 50.0 <= allowed {
            return Ok(Attempt::Done(value));
        }
        let bits = (log2_s - self.policy.abs_tol.log2()).ceil() as u32 + 24;
        Ok(Attempt::NeedsBits(bits.max(64)))
    }

    /// Values at `t_n = n·h` for `n = 0..=n_max`, where `τ = m·h`; identical to
    /// `eval_point(n / m, (n % m)·h)` for every `n`.
    ///
    /// Points that need extended precision are evaluated together: on a delay-aligned
    /// grid every shifted argument `t_n − kτ` is itself a grid point `x_i`, so one
    /// logarithm per `x_i` suffices and the powers `x_i^{αk+β−1}` follow from
    /// `x_i^{β−1}` by repeated multiplication with `x_i^α`.
    pub fn eval_grid(&self, h: f64, m: usize, n_max: usize) -> Result<Vec<Complex64>, MlError> {
        if m == 0 {
            return Err(MlError::Domain("steps per delay must be >= 1".into()));
        }
        let mut out = Vec::with_capacity(n_max + 1);
        let mut pending: Vec<(usize, u32)> = Vec::new();
        for n in 0..=n_max {
            match self.eval_double(n / m, (n % m) as f64 * h)? {
                Attempt::Done(v) => out.push(v),
                Attempt::NeedsBits(b) => {
                    out.push(Complex64::new(0.0, 0.0));
                    pending.push((n, b));
                }
            }
        }
        if !pending.is_empty() {
            self.grid_mp(h, m, &pending, &mut out)?;
        }
        Ok(out)
    }

    fn grid_mp(&self, h: f64, m: usize, pending: &[(usize, u32)], out: &mut [Complex64]) -> Result<(), MlError> {
        let bits = pending.iter().map(|p| p.1).max().unwrap_or(64);
        let n_hi = pending.last().map_or(0, |p| p.0);
        let n_terms = (n_hi / m + 1).min(self.terms.len());
        let local;
        let table = match &self.mp {
            Some(t) if t.prec >= bits && t.c_re.len() >= n_terms => t,
            _ => {
                local = self.build_table(bits, n_terms);
                &local
            }
        };
        let prec = table.prec;
        // slot[n] indexes the accumulator of a pending point.
        let mut slot = vec![usize::MAX; n_hi + 1];
        for (j, &(n, _)) in pending.iter().enumerate() {
            slot[n] = j;
        }
        let mut acc_re: Vec<Float> = (0..pending.len()).map(|_| Float::with_val(prec, 0)).collect();
        let mut acc_im: Vec<Float> = (0..pending.len()).map(|_| Float::with_val(prec, 0)).collect();
        let alpha = Float::with_val(prec, self.alpha);
        let tau = Float::with_val(prec, self.tau);
        let mut x = Float::new(prec);
        let mut lx = Float::new(prec);
        let mut step = Float::new(prec);
        let mut pow = Float::new(prec);
        let mut w = Float::new(prec);
        for i in 0..=n_hi {
            x.assign(&tau * ((i / m) as u32));
            x += (i % m) as f64 * h;
            if x.is_zero() {
                for k in 0..n_terms {
                    let n = i + k * m;
                    if n > n_hi {
                        break;
                    }
                    let j = slot[n];
                    if j == usize::MAX || (table.c_re[k].is_zero() && table.c_im[k].is_zero()) {
                        continue;
                    }
                    if table.exponent[k].is_zero() {
                        acc_re[j] += &table.c_re[k];
                        acc_im[j] += &table.c_im[k];
                    } else if table.exponent[k] < 0u32 {
                        return Err(MlError::Singular {
                            t: (n / m) as f64 * self.tau + (n % m) as f64 * h,
                        });
                    }
                }
                continue;
            }
            lx.assign(x.ln_ref());
            step.assign(&lx * &alpha);
            step.exp_mut();
            pow.assign(&lx * &table.exponent[0]);
            pow.exp_mut();
            for k in 0..n_terms {
                let n = i + k * m;
                if n > n_hi {
                    break;
                }
                let j = slot[n];
                if j != usize::MAX && !(table.c_re[k].is_zero() && table.c_im[k].is_zero()) {
                    w.assign(&pow * &table.c_re[k]);
                    acc_re[j] += &w;
                    w.assign(&pow * &table.c_im[k]);
                    acc_im[j] += &w;
                }
                pow *= &step;
            }
        }
        for (j, &(n, _)) in pending.iter().enumerate() {
            out[n] = Complex64::new(acc_re[j].to_f64(), acc_im[j].to_f64());
        }
        Ok(())
    }

    fn required_bits(&self, knot: usize, offset: f64) -> Option<u32> {
        let n = (knot + 1).min(self.terms.len());
        let mut max_ln = f64::NEG_INFINITY;
        for k in 0..n {
            let term = &self.terms[k];
            let x = (knot - k) as f64 * self.tau + offset;
            if x > 0.0 && term.ln_mag > f64::NEG_INFINITY {
                max_ln = max_ln.max(term.ln_mag + term.exponent * x.ln());
            }
        }
        let log2_s = max_ln / std::f64::consts::LN_2 + (n as f64).log2();
        if !log2_s.is_finite() || log2_s - 50.0 <= self.policy.abs_tol.log2() {
            None
        } else {
            Some((log2_s - self.policy.abs_tol.log2()).ceil() as u32 + 24)
        }
    }

    fn build_table(&self, prec: u32, n_terms: usize) -> MpTable {
        let alpha = Float::with_val(prec, self.alpha);
        let beta = Float::with_val(prec, self.beta);
        let lr = Float::with_val(prec, self.lambda.re);
        let li = Float::with_val(prec, self.lambda.im);
        let mut p_re = Float::with_val(prec, 1);
        let mut p_im = Float::with_val(prec, 0);
        let mut c_re = Vec::with_capacity(n_terms);
        let mut c_im = Vec::with_capacity(n_terms);
        let mut exponent = Vec::with_capacity(n_terms);
        let mut g = Float::new(prec);
        let mut tmp = Float::new(prec);
        for k in 0..n_terms {
            if k > 0 {
                let re = Float::with_val(prec, &p_re * &lr) - Float::with_val(prec, &p_im * &li);
                let im = Float::with_val(prec, &p_re * &li) + Float::with_val(prec, &p_im * &lr);
                p_re = re;
                p_im = im;
            }
            g.assign(&alpha * (k as u32));
            g += &beta;
            let mut e = g.clone();
            e -= 1u32;
            exponent.push(e);
            if g <= 0u32 && g.is_integer() {
                c_re.push(Float::with_val(prec, 0));
                c_im.push(Float::with_val(prec, 0));
                continue;
            }
            tmp.assign(&g);
            tmp.gamma_mut();
            c_re.push(Float::with_val(prec, &p_re / &tmp));
            c_im.push(Float::with_val(prec, &p_im / &tmp));
        }
        MpTable {
            prec,
            c_re,
            c_im,
            exponent,
        }
    }

    fn eval_mp(&self, knot: usize, offset: f64, bits: u32) -> Result<Complex64, MlError> {
        let n = (knot + 1).min(self.terms.len());
        let local;
        let table = match &self.mp {
            Some(t) if t.prec >= bits && t.c_re.len() >= n => t,
            _ => {
                log::debug!("extended-precision table rebuilt at {bits} bits for {n} terms");
                local = self.build_table(bits, n);
                &local
            }
        };
        let prec = table.prec;
        let tau = Float::with_val(prec, self.tau);
        let off = Float::with_val(prec, offset);
        let mut sum_re = Float::with_val(prec, 0);
        let mut sum_im = Float::with_val(prec, 0);
        let mut x = Float::new(prec);
        let mut w = Float::new(prec);
        for k in 0..n {
            if table.c_re[k].is_zero() && table.c_im[k].is_zero() {
                continue;
            }
            x.assign(&tau * ((knot - k) as u32));
            x += &off;
            if x.is_zero() {
                if table.exponent[k].is_zero() {
                    sum_re += &table.c_re[k];
                    sum_im += &table.c_im[k];
                } else if table.exponent[k] < 0u32 {
                    return Err(MlError::Singular {
                        t: knot as f64 * self.tau + offset,
                    });
                }
                continue;
            }
            x.ln_mut();
            x *= &table.exponent[k];
            x.exp_mut();
            w.assign(&x * &table.c_re[k]);
            sum_re += &w;
            w.assign(&x * &table.c_im[k]);
            sum_im += &w;
        }
        Ok(Complex64::new(sum_re.to_f64(), sum_im.to_f64()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(alpha: f64, beta: f64, lambda: Complex64, tau: f64, t_max: f64) -> MlKernel {
        MlKernel::new(alpha, beta, lambda, tau, t_max, EvalPolicy::default()).unwrap()
    }

    #[test]
    fn ln_gamma_signed_handles_negative_arguments() {
        let (lg, s) = ln_gamma_signed(-0.5).unwrap();
        // Γ(−0.5) = −2√π
        assert_eq!(s, -1.0);
        assert!((lg - (2.0 * std::f64::consts::PI.sqrt()).ln()).abs() < 1e-13);
        assert!(ln_gamma_signed(-2.0).is_none());
        assert!(ln_gamma_signed(0.0).is_none());
    }

    #[test]
    fn double_and_extended_paths_agree_in_the_overlap() {
        let k = kernel(0.5, 1.0, Complex64::new(-1.0, 0.0), 1.0, 12.0);
        for &t in &[3.3, 7.9, 11.5] {
            let knot = (t / 1.0f64).floor() as usize;
            let off = t - knot as f64;
            let fast = k.eval_point(knot, off).unwrap();
            let slow = k.eval_mp(knot, off, 200).unwrap();
            assert!((fast - slow).norm() < 1e-12, "t={t}: {fast} vs {slow}");
        }
    }

    #[test]
    fn large_t_uses_enough_bits() {
        // Max term ~1e35 at t = 200; the sum is a small decaying number.
        let k = kernel(0.5, 1.0, Complex64::new(-1.0, 0.0), 1.0, 200.0);
        let v = k.eval(200.0).unwrap();
        assert!(v.norm() < 0.05, "{v}");
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn knot_with_negative_exponent_is_singular() {
        let k = kernel(0.3, 0.3, Complex64::new(-1.0, 0.0), 1.0, 3.0);
        assert!(matches!(k.eval(1.0), Err(MlError::Singular { .. })));
        // β = 1: continuous at the knot.
        let k1 = kernel(0.3, 1.0, Complex64::new(-1.0, 0.0), 1.0, 3.0);
        assert!(k1.eval(1.0).is_ok());
    }

    #[test]
    fn unstable_lambda_overflows() {
        let k = kernel(0.5, 1.0, Complex64::new(5.0, 0.0), 0.01, 100.0);
        assert!(matches!(k.eval(100.0), Err(MlError::Overflow { .. })));
    }

    #[test]
    fn grid_evaluation_matches_pointwise() {
        let k = kernel(0.5, 1.5, Complex64::new(-0.7, 0.2), 0.5, 2.0);
        let g = k.eval_grid(0.05, 10, 40).unwrap();
        for (n, v) in g.iter().enumerate().skip(1) {
            let p = k.eval(n as f64 * 0.05).unwrap();
            assert!((v - p).norm() < 1e-13);
        }
        assert_eq!(g[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn extended_precision_grid_matches_pointwise() {
        // Heavy cancellation for t beyond ~30: both paths fall back to extended precision.
        for (alpha, beta, lambda) in [
            (0.5, 1.0, Complex64::new(-1.0, 0.0)),
            (0.3, 1.3, Complex64::new(-0.5, 0.0)),
            (0.7, 1.7, Complex64::new(-0.4, 0.3)),
        ] {
            let k = kernel(alpha, beta, lambda, 1.0, 60.0);
            let g = k.eval_grid(0.25, 4, 240).unwrap();
            for n in (1..=240).step_by(7) {
                let p = k.eval_point(n / 4, (n % 4) as f64 * 0.25).unwrap();
                assert!((g[n] - p).norm() <= 1e-12 * p.norm().max(1.0), "n = {n}: {} vs {p}", g[n]);
            }
        }
    }
}
