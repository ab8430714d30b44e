//! Linear algebra for the transformed system.
//!
//! With `T⁻¹AT = diag(λ_i id + η_i N)` (Jordan form) and the scaling
//! `P_i = diag(1, γ, …, γ^{d_i−1})`, the substitution `x = TP·y` turns
//! `ᶜD^α x = A x(t−τ) + g(x, x(t−τ))` into
//!
//! ```text
//! ᶜD^α y = diag(λ) y(t−τ) + h(y, y(t−τ)),
//! h(u, v) = diag(γ_i N) v + (TP)⁻¹ g(TP u, TP v),
//! ```
//!
//! whose nilpotent coupling has size `γ`. Diagonalisable matrices are decomposed
//! automatically; defective ones must come with an explicit [`JordanStructure`].

use std::sync::Arc;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nonlinearity::{Nonlinearity, NonlinearityError, NonlinearitySpec};

/// Default bound on the condition number of the eigenvector matrix.
pub const DEFAULT_COND_LIMIT: f64 = 1e8;
/// Default nilpotent scaling.
pub const DEFAULT_GAMMA: f64 = 0.01;
/// Monte-Carlo sample pairs for sampled Lipschitz estimates.
pub const LIPSCHITZ_SAMPLES: usize = 10_000;
/// Safety factor applied to sampled Lipschitz estimates.
pub const LIPSCHITZ_SAFETY: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinopsError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is empty")]
    Empty,
    /// The eigenvector matrix is too ill-conditioned (or the matrix is defective):
    /// supply an explicit Jordan structure instead.
    #[error("near-defective matrix: eigenvector condition estimate {cond:.3e} exceeds {limit:.3e} or residual {residual:.3e} too large")]
    NearDefective { cond: f64, limit: f64, residual: f64 },
    #[error("transform is singular")]
    Singular,
    #[error("invalid Jordan structure: {0}")]
    InvalidStructure(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("eigenvalue computation failed")]
    EigenFailure,
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
}

/// A square complex matrix `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    entries: DMatrix<Complex64>,
}

impl SystemMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self, LinopsError> {
        if entries.nrows() != entries.ncols() {
            return Err(LinopsError::NotSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        if entries.nrows() == 0 {
            return Err(LinopsError::Empty);
        }
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(LinopsError::NonFinite);
        }
        Ok(SystemMatrix { entries })
    }

    /// From complex rows.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self, LinopsError> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(LinopsError::NotSquare {
                rows: n,
                cols: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// From real rows.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self, LinopsError> {
        let c: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&c)
    }

    pub fn diagonal(values: &[Complex64]) -> Result<Self, LinopsError> {
        let n = values.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                values[i]
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|z| z.im == 0.0)
    }
}

/// Induced max-norm `‖M‖∞` (largest absolute row sum).
pub fn norm_inf(m: &DMatrix<Complex64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// One Jordan block `λ id + η N` of size `size`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JordanBlock {
    pub lambda: Complex64,
    pub size: usize,
    /// 1 if the block carries the nilpotent superdiagonal, 0 otherwise.
    pub eta: u8,
}

/// `T⁻¹AT = diag(λ_i id + η_i N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanStructure {
    pub blocks: Vec<JordanBlock>,
    pub transform: DMatrix<Complex64>,
}

impl JordanStructure {
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.size).sum()
    }

    pub fn validate(&self) -> Result<(), LinopsError> {
        let d = self.transform.nrows();
        if self.transform.ncols() != d {
            return Err(LinopsError::NotSquare {
                rows: d,
                cols: self.transform.ncols(),
            });
        }
        if self.blocks.iter().any(|b| b.size == 0 || b.eta > 1) {
            return Err(LinopsError::InvalidStructure(
                "block sizes must be >= 1 and eta in {0, 1}".into(),
            ));
        }
        if self.dim() != d {
            return Err(LinopsError::InvalidStructure(format!(
                "block sizes sum to {}, transform is {d}x{d}",
                self.dim()
            )));
        }
        Ok(())
    }

    /// The Jordan matrix `diag(λ_i id + η_i N)`.
    pub fn jordan_matrix(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        let mut j = DMatrix::zeros(d, d);
        let mut o = 0;
        for b in &self.blocks {
            for k in 0..b.size {
                j[(o + k, o + k)] = b.lambda;
                if k + 1 < b.size && b.eta == 1 {
                    j[(o + k, o + k + 1)] = Complex64::new(1.0, 0.0);
                }
            }
            o += b.size;
        }
        j
    }

    /// `‖A T − T J‖∞ / max(1, ‖A‖∞)`: how well the structure describes `A`.
    pub fn relative_residual(&self, a: &SystemMatrix) -> Result<f64, LinopsError> {
        self.validate()?;
        if a.dim() != self.dim() {
            return Err(LinopsError::InvalidStructure(format!(
                "structure has dimension {}, matrix {}",
                self.dim(),
                a.dim()
            )));
        }
        let r = a.entries() * &self.transform - &self.transform * self.jordan_matrix();
        Ok(norm_inf(&r) / norm_inf(a.entries()).max(1.0))
    }

    /// Eigenvalues with multiplicity, in block order.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.blocks
            .iter()
            .flat_map(|b| std::iter::repeat(b.lambda).take(b.size))
            .collect()
    }
}

fn cond_2(m: &DMatrix<Complex64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Unit 2-norm, with the largest-modulus component made real and positive.
fn normalize_column(v: &mut [Complex64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let mut best = 0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > v[best].norm() * (1.0 + 1e-12) {
            best = i;
        }
    }
    let phase = v[best] / v[best].norm();
    for z in v.iter_mut() {
        *z = *z / phase / norm;
    }
}

/// Eigenvalues of `A` with multiplicity, from a complex Schur decomposition (defective
/// matrices included). Diagonal matrices return their diagonal exactly; for real
/// matrices eigenvalues with negligible imaginary part are made real.
pub fn matrix_eigenvalues(a: &SystemMatrix) -> Result<Vec<Complex64>, LinopsError> {
    let m = a.entries();
    let d = a.dim();
    if (0..d).all(|i| (0..d).all(|j| i == j || m[(i, j)] == Complex64::new(0.0, 0.0))) {
        return Ok((0..d).map(|i| m[(i, i)]).collect());
    }
    let scale = norm_inf(m).max(1.0);
    let eig = Schur::new(m.clone())
        .eigenvalues()
        .ok_or(LinopsError::EigenFailure)?;
    let mut lambdas: Vec<Complex64> = eig.iter().cloned().collect();
    if a.is_real() {
        for l in lambdas.iter_mut() {
            if l.im.abs() <= 1e-14 * scale {
                l.im = 0.0;
            }
        }
    }
    Ok(lambdas)
}

/// Diagonalises `A`: all blocks have size 1 and `η = 0`.
///
/// Eigenvalues come from a complex Schur decomposition; eigenvectors for each cluster
/// of (numerically) equal eigenvalues are the right singular vectors of `A − λI`
/// belonging to its smallest singular values. The result is accepted only if the
/// eigen-residual is small and `cond₂(T) ≤ cond_limit`.
pub fn eigendecompose(a: &SystemMatrix, cond_limit: f64) -> Result<JordanStructure, LinopsError> {
    if !(cond_limit >= 1.0) {
        return Err(LinopsError::Domain(format!("cond_limit must be >= 1, got {cond_limit}")));
    }
    let m = a.entries();
    let d = a.dim();
    let is_diag = (0..d).all(|i| (0..d).all(|j| i == j || m[(i, j)] == Complex64::new(0.0, 0.0)));
    if is_diag {
        return Ok(JordanStructure {
            blocks: (0..d)
                .map(|i| JordanBlock {
                    lambda: m[(i, i)],
                    size: 1,
                    eta: 0,
                })
                .collect(),
            transform: DMatrix::identity(d, d),
        });
    }
    let scale = norm_inf(m).max(1.0);
    let lambdas = matrix_eigenvalues(a)?;

    // Cluster eigenvalues closer than a relative tolerance.
    let tol = 1e-7 * scale;
    let mut cluster_of = vec![usize::MAX; d];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..d {
        if cluster_of[i] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        let mut members = vec![i];
        cluster_of[i] = id;
        for j in i + 1..d {
            if cluster_of[j] == usize::MAX && (lambdas[j] - lambdas[i]).norm() <= tol {
                cluster_of[j] = id;
                members.push(j);
            }
        }
        clusters.push(members);
    }

    let mut t = DMatrix::<Complex64>::zeros(d, d);
    let mut blocks = Vec::with_capacity(d);
    let mut col = 0;
    for members in &clusters {
        let mean = members.iter().map(|&i| lambdas[i]).sum::<Complex64>() / members.len() as f64;
        let shifted = m - DMatrix::<Complex64>::identity(d, d) * mean;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.ok_or(LinopsError::EigenFailure)?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
        for (k, &i) in members.iter().enumerate() {
            let row = order[k];
            let mut v: Vec<Complex64> = v_t.row(row).iter().map(|z| z.conj()).collect();
            normalize_column(&mut v);
            for r in 0..d {
                t[(r, col)] = v[r];
            }
            blocks.push(JordanBlock {
                lambda: if members.len() > 1 { mean } else { lambdas[i] },
                size: 1,
                eta: 0,
            });
            col += 1;
        }
    }
    let structure = JordanStructure { blocks, transform: t };
    let residual = structure.relative_residual(a)?;
    let cond = cond_2(&structure.transform);
    if !(cond <= cond_limit) || !(residual <= 1e-9) {
        return Err(LinopsError::NearDefective {
            cond,
            limit: cond_limit,
            residual,
        });
    }
    Ok(structure)
}

/// Linear part of the transformed system.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedSystem {
    /// `λ_i` repeated per block size.
    pub diag_lambdas: Vec<Complex64>,
    /// `M = T·P`.
    pub combined_transform: DMatrix<Complex64>,
    /// `M⁻¹`.
    pub inverse_transform: DMatrix<Complex64>,
    /// `diag(γ_i N)` with `γ_i = γ` on blocks with `η_i = 1`.
    pub nilpotent: DMatrix<Complex64>,
    pub gamma: f64,
}

impl TransformedSystem {
    pub fn dim(&self) -> usize {
        self.diag_lambdas.len()
    }

    /// Whether some block carries a nilpotent part.
    pub fn has_nilpotent(&self) -> bool {
        self.nilpotent.iter().any(|z| z.norm() > 0.0)
    }

    /// `(TP)⁻¹ A (TP)`.
    pub fn conjugated(&self, a: &SystemMatrix) -> DMatrix<Complex64> {
        &self.inverse_transform * a.entries() * &self.combined_transform
    }

    pub fn to_original(&self, y: &[Complex64], out: &mut [Complex64]) {
        mat_vec(&self.combined_transform, y, out);
    }

    pub fn to_transformed(&self, x: &[Complex64], out: &mut [Complex64]) {
        mat_vec(&self.inverse_transform, x, out);
    }
}

pub(crate) fn mat_vec(m: &DMatrix<Complex64>, v: &[Complex64], out: &mut [Complex64]) {
    let d = m.nrows();
    for i in 0..d {
        let mut s = Complex64::new(0.0, 0.0);
        for j in 0..m.ncols() {
            s += m[(i, j)] * v[j];
        }
        out[i] = s;
    }
}

/// Builds `P`, `M = TP`, `M⁻¹` and `diag(γ_i N)`.
pub fn gamma_rescale(j: &JordanStructure, gamma: f64) -> Result<TransformedSystem, LinopsError> {
    j.validate()?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(LinopsError::Domain(format!("gamma must be finite and > 0, got {gamma}")));
    }
    let d = j.dim();
    let mut p = DMatrix::<Complex64>::zeros(d, d);
    let mut nil = DMatrix::<Complex64>::zeros(d, d);
    let mut o = 0;
    for b in &j.blocks {
        for k in 0..b.size {
            p[(o + k, o + k)] = Complex64::new(gamma.powi(k as i32), 0.0);
            if k + 1 < b.size && b.eta == 1 {
                nil[(o + k, o + k + 1)] = Complex64::new(gamma, 0.0);
            }
        }
        o += b.size;
    }
    let m = &j.transform * p;
    let inv = m.clone().try_inverse().ok_or(LinopsError::Singular)?;
    Ok(TransformedSystem {
        diag_lambdas: j.eigenvalues(),
        combined_transform: m,
        inverse_transform: inv,
        nilpotent: nil,
        gamma,
    })
}

/// The transformed nonlinearity `h(u, v) = diag(γ_i N) v + M⁻¹ g(M u, M v)`.
#[derive(Clone)]
pub struct TransformedNonlinearity {
    g: Arc<dyn Nonlinearity>,
    m: DMatrix<Complex64>,
    m_inv: DMatrix<Complex64>,
    nilpotent: DMatrix<Complex64>,
    nil_norm: f64,
    m_norm: f64,
    m_inv_norm: f64,
    identity: bool,
}

impl std::fmt::Debug for TransformedNonlinearity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformedNonlinearity")
            .field("dim", &self.m.nrows())
            .field("nil_norm", &self.nil_norm)
            .field("m_norm", &self.m_norm)
            .field("m_inv_norm", &self.m_inv_norm)
            .finish()
    }
}

impl TransformedNonlinearity {
    /// `ℓ_h(ρ) ≤ ‖diag(γ_i N)‖∞ + ‖M⁻¹‖∞ ‖M‖∞ ℓ_g(‖M‖∞ ρ)`, given a bound for `ℓ_g`.
    pub fn lipschitz_from(&self, rho: f64, ell_g: impl Fn(f64) -> f64) -> f64 {
        self.nil_norm + self.m_inv_norm * self.m_norm * ell_g(self.m_norm * rho)
    }

    pub fn inner(&self) -> &Arc<dyn Nonlinearity> {
        &self.g
    }

    pub fn transform_norm(&self) -> f64 {
        self.m_norm
    }

    pub fn inverse_norm(&self) -> f64 {
        self.m_inv_norm
    }
}

impl Nonlinearity for TransformedNonlinearity {
    fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn eval(&self, u: &[Complex64], v: &[Complex64], out: &mut [Complex64]) {
        let d = self.m.nrows();
        if self.identity {
            self.g.eval(u, v, out);
        } else {
            let mut mu = vec![Complex64::new(0.0, 0.0); d];
            let mut mv = vec![Complex64::new(0.0, 0.0); d];
            let mut gv = vec![Complex64::new(0.0, 0.0); d];
            mat_vec(&self.m, u, &mut mu);
            mat_vec(&self.m, v, &mut mv);
            self.g.eval(&mu, &mv, &mut gv);
            mat_vec(&self.m_inv, &gv, out);
        }
        if self.nil_norm > 0.0 {
            for i in 0..d {
                for j in 0..d {
                    out[i] += self.nilpotent[(i, j)] * v[j];
                }
            }
        }
    }

    fn lipschitz_bound(&self, rho: f64) -> Option<f64> {
        let nil = self.nil_norm;
        let (mn, mi) = (self.m_norm, self.m_inv_norm);
        self.g.lipschitz_bound(mn * rho).map(|l| nil + mi * mn * l)
    }

    fn satisfies_h2(&self) -> bool {
        self.g.satisfies_h2()
    }
}

/// Composes `g` with the transform of `ts`.
pub fn transform_nonlinearity(g: Arc<dyn Nonlinearity>, ts: &TransformedSystem) -> TransformedNonlinearity {
    let d = ts.dim();
    let id = DMatrix::<Complex64>::identity(d, d);
    TransformedNonlinearity {
        identity: ts.combined_transform == id && ts.inverse_transform == id,
        nil_norm: norm_inf(&ts.nilpotent),
        m_norm: norm_inf(&ts.combined_transform),
        m_inv_norm: norm_inf(&ts.inverse_transform),
        g,
        m: ts.combined_transform.clone(),
        m_inv: ts.inverse_transform.clone(),
        nilpotent: ts.nilpotent.clone(),
    }
}

/// Analytic upper bound for `ℓ_g(ρ)` of a built-in nonlinearity.
pub fn estimate_lipschitz(g_spec: &NonlinearitySpec, dim: usize, rho: f64) -> Result<f64, LinopsError> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(LinopsError::Domain(format!("rho must be finite and > 0, got {rho}")));
    }
    Ok(g_spec.lipschitz_bound(dim, rho)?)
}

/// `ℓ_g(ρ)` for any nonlinearity: the analytic bound when available, otherwise the
/// largest sampled difference quotient times [`LIPSCHITZ_SAFETY`].
///
/// Half of the [`LIPSCHITZ_SAMPLES`] pairs are independent points on the product of
/// ρ-spheres, half are close pairs (relative separation `10⁻³` in one argument), since the supremum
/// of a smooth `g` is approached by nearby points.
pub fn estimate_lipschitz_dyn(g: &dyn Nonlinearity, rho: f64, seed: u64) -> Result<f64, LinopsError> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(LinopsError::Domain(format!("rho must be finite and > 0, got {rho}")));
    }
    if let Some(b) = g.lipschitz_bound(rho) {
        return Ok(b);
    }
    let d = g.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let on_sphere = |rng: &mut ChaCha8Rng| -> Vec<Complex64> {
        let mut v: Vec<Complex64> = (0..d)
            .map(|_| Complex64::new(rng.random_range(-rho..=rho), 0.0))
            .collect();
        let k = rng.random_range(0..d);
        v[k] = Complex64::new(if rng.random::<bool>() { rho } else { -rho }, 0.0);
        v
    };
    let mut best: f64 = 0.0;
    let mut g1 = vec![Complex64::new(0.0, 0.0); d];
    let mut g2 = vec![Complex64::new(0.0, 0.0); d];
    for s in 0..LIPSCHITZ_SAMPLES {
        let x = on_sphere(&mut rng);
        let y = on_sphere(&mut rng);
        let (xh, yh) = if s % 2 == 0 {
            (on_sphere(&mut rng), on_sphere(&mut rng))
        } else {
            let nudge = |v: &[Complex64], rng: &mut ChaCha8Rng| -> Vec<Complex64> {
                v.iter()
                    .map(|z| {
                        let p = z.re + 1e-3 * rho * rng.random_range(-1.0..=1.0);
                        Complex64::new(p.clamp(-rho, rho), 0.0)
                    })
                    .collect()
            };
            // Perturb one argument at a time so each partial modulus is probed.
            if (s / 2) % 2 == 0 {
                (nudge(&x, &mut rng), y.clone())
            } else {
                (x.clone(), nudge(&y, &mut rng))
            }
        };
        let den = crate::complex::max_norm(&diff(&x, &xh)) + crate::complex::max_norm(&diff(&y, &yh));
        if den == 0.0 {
            continue;
        }
        g.eval(&x, &y, &mut g1);
        g.eval(&xh, &yh, &mut g2);
        best = best.max(crate::complex::max_norm(&diff(&g1, &g2)) / den);
    }
    Ok(best * LIPSCHITZ_SAFETY)
}

fn diff(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{FnNonlinearity, NonlinearityKind};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_matrix_is_its_own_decomposition() {
        let a = SystemMatrix::from_real_rows(&[vec![-1.0, 0.0], vec![0.0, -2.0]]).unwrap();
        let j = eigendecompose(&a, DEFAULT_COND_LIMIT).unwrap();
        assert_eq!(j.transform, DMatrix::identity(2, 2));
        assert_eq!(j.eigenvalues(), vec![c(-1.0, 0.0), c(-2.0, 0.0)]);
    }

    #[test]
    fn rotation_generator_has_standard_eigenvectors() {
        let a = SystemMatrix::from_real_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let j = eigendecompose(&a, DEFAULT_COND_LIMIT).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut seen_plus = false;
        let mut seen_minus = false;
        for (k, b) in j.blocks.iter().enumerate() {
            let v0 = j.transform[(0, k)];
            let v1 = j.transform[(1, k)];
            if (b.lambda - c(0.0, 1.0)).norm() < 1e-12 {
                seen_plus = true;
                assert!((v0 - c(s, 0.0)).norm() < 1e-12 && (v1 - c(0.0, s)).norm() < 1e-12);
            } else {
                assert!((b.lambda - c(0.0, -1.0)).norm() < 1e-12);
                seen_minus = true;
                assert!((v0 - c(s, 0.0)).norm() < 1e-12 && (v1 - c(0.0, -s)).norm() < 1e-12);
            }
        }
        assert!(seen_plus && seen_minus);
    }

    #[test]
    fn defective_matrix_is_rejected() {
        let a = SystemMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            eigendecompose(&a, DEFAULT_COND_LIMIT),
            Err(LinopsError::NearDefective { .. })
        ));
    }

    #[test]
    fn general_matrix_round_trip_and_spectrum() {
        let a = SystemMatrix::from_real_rows(&[
            vec![-1.0, 0.3, 0.0],
            vec![0.2, -0.8, 0.1],
            vec![0.0, -0.5, -1.2],
        ])
        .unwrap();
        let j = eigendecompose(&a, DEFAULT_COND_LIMIT).unwrap();
        let ts = gamma_rescale(&j, 0.1).unwrap();
        let id = &ts.combined_transform * &ts.inverse_transform;
        assert!((id - DMatrix::<Complex64>::identity(3, 3)).norm() < 1e-10);
        let conj = ts.conjugated(&a);
        for i in 0..3 {
            assert!((conj[(i, i)] - ts.diag_lambdas[i]).norm() < 1e-8);
        }
    }

    #[test]
    fn jordan_block_rescaling() {
        let lambda = c(-1.0, 0.0);
        let j = JordanStructure {
            blocks: vec![JordanBlock {
                lambda,
                size: 2,
                eta: 1,
            }],
            transform: DMatrix::identity(2, 2),
        };
        let ts = gamma_rescale(&j, 0.1).unwrap();
        let a = SystemMatrix::from_real_rows(&[vec![-1.0, 1.0], vec![0.0, -1.0]]).unwrap();
        let conj = ts.conjugated(&a);
        assert!((conj[(0, 1)] - c(0.1, 0.0)).norm() < 1e-14);
        assert!((conj[(0, 0)] - lambda).norm() < 1e-14);

        let ts1 = gamma_rescale(&j, 1.0).unwrap();
        assert_eq!(ts1.combined_transform, DMatrix::identity(2, 2));
    }

    #[test]
    fn transformed_zero_nonlinearity_is_nilpotent_coupling() {
        let j = JordanStructure {
            blocks: vec![JordanBlock {
                lambda: c(-1.0, 0.0),
                size: 2,
                eta: 1,
            }],
            transform: DMatrix::identity(2, 2),
        };
        let ts = gamma_rescale(&j, 0.1).unwrap();
        let g = NonlinearitySpec::zero().build(2).unwrap();
        let h = transform_nonlinearity(g, &ts);
        let mut out = [c(0.0, 0.0); 2];
        h.eval(&[c(5.0, 0.0), c(6.0, 0.0)], &[c(2.0, 0.0), c(3.0, 0.0)], &mut out);
        assert!((out[0] - c(0.3, 0.0)).norm() < 1e-15);
        assert_eq!(out[1], c(0.0, 0.0));
    }

    #[test]
    fn transformed_quadratic_with_identity_is_unchanged() {
        let j = eigendecompose(&SystemMatrix::diagonal(&[c(-1.0, 0.0)]).unwrap(), 1e8).unwrap();
        let ts = gamma_rescale(&j, 0.01).unwrap();
        let g = NonlinearitySpec::new(NonlinearityKind::Quadratic, vec![0.05])
            .build(1)
            .unwrap();
        let h = transform_nonlinearity(g.clone(), &ts);
        let (mut a, mut b) = ([c(0.0, 0.0)], [c(0.0, 0.0)]);
        h.eval(&[c(0.3, 0.0)], &[c(0.1, 0.0)], &mut a);
        g.eval(&[c(0.3, 0.0)], &[c(0.1, 0.0)], &mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn h_vanishes_at_origin_under_general_transform() {
        let a = SystemMatrix::from_real_rows(&[vec![0.0, 1.0], vec![-1.0, -0.5]]).unwrap();
        let j = eigendecompose(&a, DEFAULT_COND_LIMIT).unwrap();
        let ts = gamma_rescale(&j, 0.01).unwrap();
        let g = NonlinearitySpec::new(NonlinearityKind::Sine, vec![0.2, 0.1])
            .build(2)
            .unwrap();
        let h = transform_nonlinearity(g, &ts);
        let mut out = [c(1.0, 1.0); 2];
        h.eval(&[c(0.0, 0.0); 2], &[c(0.0, 0.0); 2], &mut out);
        assert!(crate::complex::max_norm(&out) < 1e-12);
    }

    #[test]
    fn lipschitz_limit_reflects_nilpotent_part() {
        let g = NonlinearitySpec::new(NonlinearityKind::Quadratic, vec![1.0])
            .build(2)
            .unwrap();
        let jordan = JordanStructure {
            blocks: vec![JordanBlock {
                lambda: c(-1.0, 0.0),
                size: 2,
                eta: 1,
            }],
            transform: DMatrix::identity(2, 2),
        };
        let ts = gamma_rescale(&jordan, 0.05).unwrap();
        let h = transform_nonlinearity(g.clone(), &ts);
        let l = h.lipschitz_bound(1e-9).unwrap();
        assert!((l - 0.05).abs() < 1e-6, "{l}");

        let diag = eigendecompose(&SystemMatrix::diagonal(&[c(-1.0, 0.0), c(-2.0, 0.0)]).unwrap(), 1e8).unwrap();
        let ts = gamma_rescale(&diag, 0.05).unwrap();
        let h = transform_nonlinearity(g, &ts);
        assert!(h.lipschitz_bound(1e-9).unwrap() < 1e-6);
    }

    #[test]
    fn estimate_lipschitz_examples() {
        let z = NonlinearitySpec::zero();
        assert_eq!(estimate_lipschitz(&z, 1, 0.5).unwrap(), 0.0);
        let q = NonlinearitySpec::new(NonlinearityKind::Quadratic, vec![1.0]);
        assert!((estimate_lipschitz(&q, 1, 0.1).unwrap() - 0.2).abs() < 1e-15);
        assert!(estimate_lipschitz(&q, 1, 0.0).is_err());
    }

    #[test]
    fn sampled_lipschitz_is_close_to_and_above_the_truth() {
        // g(x, y) = x², true ℓ on the ρ-ball is 2ρ.
        let g = FnNonlinearity::new(
            1,
            |x: &[Complex64], _y: &[Complex64], out: &mut [Complex64]| out[0] = x[0] * x[0],
            None,
            true,
        );
        let est = estimate_lipschitz_dyn(&g, 0.5, 7).unwrap();
        assert!((1.0..=1.25 + 1e-9).contains(&est), "{est}");
        let again = estimate_lipschitz_dyn(&g, 0.5, 7).unwrap();
        assert_eq!(est, again);
    }
}
