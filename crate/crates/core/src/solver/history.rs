//! Initial functions `φ` on `[−τ, 0]`.

use num_complex::Complex64;

use super::SolverError;

/// The history `φ`.
#[derive(Debug, Clone, PartialEq)]
pub enum HistoryFunction {
    /// `φ(t) = c`.
    Constant(Vec<Complex64>),
    /// `φ(t) = Σ_k c_k t^k`; `coeffs[k]` is the vector coefficient of `t^k`.
    Polynomial(Vec<Vec<Complex64>>),
    /// Linear interpolation of samples on an increasing grid covering `[−τ, 0]`.
    Sampled {
        grid: Vec<f64>,
        values: Vec<Vec<Complex64>>,
    },
}

impl HistoryFunction {
    pub fn constant(c: Vec<Complex64>) -> Self {
        HistoryFunction::Constant(c)
    }

    pub fn constant_real(c: &[f64]) -> Self {
        HistoryFunction::Constant(c.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zero(dim: usize) -> Self {
        HistoryFunction::Constant(vec![Complex64::new(0.0, 0.0); dim])
    }

    pub fn dim(&self) -> usize {
        match self {
            HistoryFunction::Constant(c) => c.len(),
            HistoryFunction::Polynomial(cs) => cs.first().map_or(0, |c| c.len()),
            HistoryFunction::Sampled { values, .. } => values.first().map_or(0, |v| v.len()),
        }
    }

    pub fn validate(&self, tau: f64) -> Result<(), SolverError> {
        let d = self.dim();
        if d == 0 {
            return Err(SolverError::InvalidSpec("history is empty".into()));
        }
        let finite = |v: &[Complex64]| v.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        match self {
            HistoryFunction::Constant(c) => {
                if !finite(c) {
                    return Err(SolverError::InvalidSpec("history has non-finite values".into()));
                }
            }
            HistoryFunction::Polynomial(cs) => {
                if cs.iter().any(|c| c.len() != d || !finite(c)) {
                    return Err(SolverError::InvalidSpec(
                        "polynomial coefficients must be finite vectors of equal length".into(),
                    ));
                }
            }
            HistoryFunction::Sampled { grid, values } => {
                if grid.len() != values.len() || grid.len() < 2 {
                    return Err(SolverError::InvalidSpec(
                        "sampled history needs >= 2 grid points, one value vector each".into(),
                    ));
                }
                if values.iter().any(|v| v.len() != d || !finite(v)) || grid.iter().any(|t| !t.is_finite()) {
                    return Err(SolverError::InvalidSpec("sampled history has bad values".into()));
                }
                if grid.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(SolverError::InvalidSpec("sampled grid must be increasing".into()));
                }
                let tol = 1e-12 * tau.max(1.0);
                if grid[0] > -tau + tol || *grid.last().unwrap() < -tol {
                    return Err(SolverError::InvalidSpec(format!(
                        "sampled grid [{}, {}] must cover [-tau, 0] = [{}, 0]",
                        grid[0],
                        grid.last().unwrap(),
                        -tau
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes `φ(t)` into `out`.
    pub fn eval(&self, t: f64, out: &mut [Complex64]) {
        match self {
            HistoryFunction::Constant(c) => out.copy_from_slice(c),
            HistoryFunction::Polynomial(cs) => {
                out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
                for c in cs.iter().rev() {
                    for (o, ci) in out.iter_mut().zip(c) {
                        *o = *o * t + ci;
                    }
                }
            }
            HistoryFunction::Sampled { grid, values } => {
                let n = grid.len();
                let t = t.clamp(grid[0], grid[n - 1]);
                let i = match grid.binary_search_by(|g| g.total_cmp(&t)) {
                    Ok(i) => {
                        out.copy_from_slice(&values[i]);
                        return;
                    }
                    Err(i) => i.clamp(1, n - 1),
                };
                let w = (t - grid[i - 1]) / (grid[i] - grid[i - 1]);
                for (k, o) in out.iter_mut().enumerate() {
                    *o = values[i - 1][k] * (1.0 - w) + values[i][k] * w;
                }
            }
        }
    }

    pub fn is_real(&self) -> bool {
        let real = |v: &[Complex64]| v.iter().all(|z| z.im == 0.0);
        match self {
            HistoryFunction::Constant(c) => real(c),
            HistoryFunction::Polynomial(cs) => cs.iter().all(|c| real(c)),
            HistoryFunction::Sampled { values, .. } => values.iter().all(|v| real(v)),
        }
    }

    /// `sup_{[−τ, 0]} ‖φ‖∞`: exact for constant and sampled kinds, dense sampling for
    /// polynomials.
    pub fn sup_norm(&self, tau: f64) -> f64 {
        let d = self.dim();
        match self {
            HistoryFunction::Constant(c) => crate::complex::max_norm(c),
            HistoryFunction::Sampled { values, .. } => {
                values.iter().map(|v| crate::complex::max_norm(v)).fold(0.0, f64::max)
            }
            HistoryFunction::Polynomial(_) => {
                let mut buf = vec![Complex64::new(0.0, 0.0); d];
                (0..=4096)
                    .map(|i| {
                        self.eval(-tau * i as f64 / 4096.0, &mut buf);
                        crate::complex::max_norm(&buf)
                    })
                    .fold(0.0, f64::max)
            }
        }
    }

    /// `c·φ`.
    pub fn scaled(&self, c: f64) -> Self {
        let s = |v: &Vec<Complex64>| v.iter().map(|z| z * c).collect::<Vec<_>>();
        match self {
            HistoryFunction::Constant(v) => HistoryFunction::Constant(s(v)),
            HistoryFunction::Polynomial(cs) => HistoryFunction::Polynomial(cs.iter().map(s).collect()),
            HistoryFunction::Sampled { grid, values } => HistoryFunction::Sampled {
                grid: grid.clone(),
                values: values.iter().map(s).collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn polynomial_horner() {
        // φ(t) = 1 + 2t + 3t²
        let p = HistoryFunction::Polynomial(vec![vec![r(1.0)], vec![r(2.0)], vec![r(3.0)]]);
        let mut out = [r(0.0)];
        p.eval(-0.5, &mut out);
        assert!((out[0].re - 0.75).abs() < 1e-15);
        assert!((p.sup_norm(1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_interpolation_and_coverage() {
        let s = HistoryFunction::Sampled {
            grid: vec![-1.0, -0.5, 0.0],
            values: vec![vec![r(0.0)], vec![r(1.0)], vec![r(-1.0)]],
        };
        assert!(s.validate(1.0).is_ok());
        let mut out = [r(0.0)];
        s.eval(-0.25, &mut out);
        assert!((out[0].re - 0.0).abs() < 1e-15);
        s.eval(-0.75, &mut out);
        assert!((out[0].re - 0.5).abs() < 1e-15);
        s.eval(0.0, &mut out);
        assert_eq!(out[0], r(-1.0));
        assert!(s.validate(2.0).is_err());
    }

    #[test]
    fn scaling() {
        let c = HistoryFunction::constant_real(&[0.5, -2.0]).scaled(0.5);
        assert_eq!(c.sup_norm(1.0), 1.0);
    }
}
