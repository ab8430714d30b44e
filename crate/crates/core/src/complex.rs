//! Complex scalar helpers.

use std::f64::consts::PI;

pub use num_complex::Complex64;

/// The λ of the theory: a complex number whose argument is always read on the
/// principal branch `(−π, π]`.
pub type ComplexScalar = Complex64;

/// Principal argument in `(−π, π]`.
///
/// `atan2` returns `−π` for `(−1, −0.0)`; that value is folded onto `π`.
pub fn principal_arg(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Principal power `z^p = exp(p·(ln|z| + i·arg z))`, cut along the negative real axis.
pub fn principal_pow(z: Complex64, p: f64) -> Complex64 {
    if z == Complex64::new(0.0, 0.0) {
        return Complex64::new(0.0, 0.0);
    }
    let ln_r = z.norm().ln();
    let theta = principal_arg(z);
    Complex64::from_polar((p * ln_r).exp(), p * theta)
}

/// Max-norm of a complex vector.
pub fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// Neumaier-compensated accumulator for complex sums.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    re: f64,
    re_c: f64,
    im: f64,
    im_c: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, z: Complex64) {
        neumaier(&mut self.re, &mut self.re_c, z.re);
        neumaier(&mut self.im, &mut self.im_c, z.im);
    }

    pub(crate) fn value(&self) -> Complex64 {
        Complex64::new(self.re + self.re_c, self.im + self.im_c)
    }
}

fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn principal_arg_folds_negative_zero() {
        assert_eq!(principal_arg(Complex64::new(-1.0, -0.0)), PI);
        assert_eq!(principal_arg(Complex64::new(-1.0, 0.0)), PI);
        assert!((principal_arg(Complex64::new(0.0, -1.0)) + PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum_recovers_small_addend() {
        let mut s = CompensatedSum::default();
        s.add(Complex64::new(1e16, 0.0));
        s.add(Complex64::new(1.0, 0.0));
        s.add(Complex64::new(-1e16, 0.0));
        assert_eq!(s.value().re, 1.0);
    }

    #[test]
    fn principal_pow_of_negative_real() {
        let z = principal_pow(Complex64::new(-4.0, 0.0), 0.5);
        assert!((z - Complex64::new(0.0, 2.0)).norm() < 1e-14);
    }
}
