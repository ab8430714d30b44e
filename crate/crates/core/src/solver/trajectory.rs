//! Grid functions on `[−τ, T]`.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SolverError;

/// Provenance and accuracy information attached to a trajectory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub solver: String,
    pub iterations: usize,
    pub est_error: f64,
}

/// Values at `t_i = (i − m)·h`, `i = 0..len`, where `m = τ/h` indexes `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub step: f64,
    /// Index of `t = 0`.
    pub origin: usize,
    pub dim: usize,
    values: Vec<Complex64>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    /// A trajectory from row-major values (`len·dim` entries).
    pub fn from_values(step: f64, origin: usize, dim: usize, values: Vec<Complex64>) -> Self {
        assert!(dim > 0 && values.len() % dim == 0, "values must be a whole number of rows");
        Trajectory {
            step,
            origin,
            dim,
            values,
            meta: TrajectoryMeta::default(),
        }
    }

    pub fn zeros(step: f64, origin: usize, dim: usize, len: usize) -> Self {
        Self::from_values(step, origin, dim, vec![Complex64::new(0.0, 0.0); len * dim])
    }

    /// `t0 = −τ`.
    pub fn t0(&self) -> f64 {
        -(self.origin as f64) * self.step
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        (i as f64 - self.origin as f64) * self.step
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Drops rows after `len`.
    pub fn truncate(&mut self, len: usize) {
        self.values.truncate(len * self.dim);
    }

    /// `‖x(t_i)‖∞`.
    pub fn norm_at(&self, i: usize) -> f64 {
        crate::complex::max_norm(self.row(i))
    }

    /// `sup_{t ∈ [0, T]} ‖x(t)‖∞` over grid points.
    pub fn sup_norm_forward(&self) -> f64 {
        (self.origin..self.len()).map(|i| self.norm_at(i)).fold(0.0, f64::max)
    }

    /// `sup_{t ∈ [−τ, 0]} ‖x(t)‖∞` over grid points.
    pub fn sup_norm_history(&self) -> f64 {
        (0..=self.origin.min(self.len().saturating_sub(1)))
            .map(|i| self.norm_at(i))
            .fold(0.0, f64::max)
    }

    /// `‖x(T)‖∞`.
    pub fn final_norm(&self) -> f64 {
        self.norm_at(self.len() - 1)
    }

    /// Largest `|Im x|` over all entries.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.im.abs()))
    }

    /// Max-norm deviation from another trajectory on the common grid points with
    /// `t ∈ [0, t_max]`. Both must share the step and origin.
    pub fn max_deviation(&self, other: &Trajectory, t_max: f64) -> Result<f64, SolverError> {
        if self.dim != other.dim || self.origin != other.origin || (self.step - other.step).abs() > 1e-15 {
            return Err(SolverError::InvalidSpec("trajectories live on different grids".into()));
        }
        let n = self.len().min(other.len());
        let mut dev: f64 = 0.0;
        for i in self.origin..n {
            if self.time(i) > t_max + 1e-12 {
                break;
            }
            for (a, b) in self.row(i).iter().zip(other.row(i)) {
                dev = dev.max((a - b).norm());
            }
        }
        Ok(dev)
    }

    /// Values at `t` for a grid point `t` shared with a finer trajectory, i.e. every
    /// `k`-th point. Used to compare solutions computed with different steps.
    pub fn subsample(&self, k: usize) -> Trajectory {
        assert!(k >= 1 && self.origin % k == 0, "origin must be a multiple of the factor");
        let rows: Vec<Complex64> = (0..self.len())
            .step_by(k)
            .flat_map(|i| self.row(i).to_vec())
            .collect();
        Trajectory {
            step: self.step * k as f64,
            origin: self.origin / k,
            dim: self.dim,
            values: rows,
            meta: self.meta.clone(),
        }
    }

    /// CSV with header `t,re_x1,im_x1,…` and shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for k in 1..=self.dim {
            let _ = write!(s, ",re_x{k},im_x{k}");
        }
        s.push('\n');
        for i in 0..self.len() {
            let _ = write!(s, "{}", self.time(i));
            for z in self.row(i) {
                let _ = write!(s, ",{},{}", z.re, z.im);
            }
            s.push('\n');
        }
        s
    }

    /// Parses the output of [`Trajectory::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self, SolverError> {
        let bad = |msg: String| SolverError::InvalidSpec(format!("trajectory CSV: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty input".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"t") || cols.len() < 3 || cols.len() % 2 == 0 {
            return Err(bad(format!("unexpected header `{header}`")));
        }
        let dim = (cols.len() - 1) / 2;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (ln, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(bad(format!("row {} has {} fields", ln + 1, fields.len())));
            }
            let nums: Result<Vec<f64>, _> = fields.iter().map(|f| f.trim().parse::<f64>()).collect();
            let nums = nums.map_err(|e| bad(format!("row {}: {e}", ln + 1)))?;
            times.push(nums[0]);
            for k in 0..dim {
                values.push(Complex64::new(nums[1 + 2 * k], nums[2 + 2 * k]));
            }
        }
        if times.len() < 2 {
            return Err(bad("need at least two rows".into()));
        }
        let step = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        let origin = (-times[0] / step).round();
        if origin < 0.0 {
            return Err(bad("first time must be <= 0".into()));
        }
        Ok(Trajectory {
            step,
            origin: origin as usize,
            dim,
            values,
            meta: TrajectoryMeta::default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_lossless() {
        let vals: Vec<Complex64> = (0..12)
            .map(|i| Complex64::new((i as f64).sqrt() / 3.0, -1e-17 * i as f64))
            .collect();
        let t = Trajectory::from_values(0.1, 2, 2, vals);
        let csv = t.to_csv();
        assert!(csv.starts_with("t,re_x1,im_x1,re_x2,im_x2\n"));
        let back = Trajectory::from_csv(&csv).unwrap();
        assert_eq!(back.values(), t.values());
        assert_eq!(back.origin, 2);
        assert_eq!(back.len(), 6);
        for i in 0..6 {
            assert!((back.time(i) - t.time(i)).abs() < 1e-15);
        }
    }

    #[test]
    fn norms_and_subsampling() {
        let vals: Vec<Complex64> = (0..5).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let t = Trajectory::from_values(0.5, 2, 1, vals);
        assert_eq!(t.t0(), -1.0);
        assert_eq!(t.sup_norm_history(), 2.0);
        assert_eq!(t.sup_norm_forward(), 4.0);
        let s = t.subsample(2);
        assert_eq!(s.len(), 3);
        assert_eq!(s.row(1)[0].re, 2.0);
        assert_eq!(s.origin, 1);
    }
}
