//! The JSON input document shared by all commands, and CSV artifacts.
//!
//! Complex numbers are written either as a bare real or as a `[re, im]` pair. A
//! document for a simulation looks like
//!
//! ```json
//! {
//!   "alpha": 0.5, "tau": 1.0,
//!   "A": [[-1, 0], [0, [-0.5, 0.2]]],
//!   "g": {"kind": "quadratic", "params": [0.05]},
//!   "phi": {"kind": "constant", "payload": [0.1, 0.1]},
//!   "T": 5.0, "h_step": 0.001
//! }
//! ```
//!
//! `phi` kinds are `constant` (payload: vector), `polynomial` (payload: list of vector
//! coefficients of `t^0, t^1, …`) and `sampled` (payload: `{"grid": [...], "values":
//! [[...], ...]}`).

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linops::{matrix_eigenvalues, JordanBlock, JordanStructure, SystemMatrix, DEFAULT_GAMMA};
use crate::mlfunc::MlParams;
use crate::nonlinearity::NonlinearitySpec;
use crate::region::{BoundarySample, RegionParams, RootCountWindow};
use crate::solver::{DelaySystemSpec, HistoryFunction};

/// A problem with the input; `field` names the offending entry.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("field `{field}`: {reason}")]
pub struct InputError {
    pub field: String,
    pub reason: String,
}

impl InputError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        InputError {
            field: field.into(),
            reason: reason.into(),
        }
    }

    fn missing(field: &str) -> Self {
        Self::new(field, "required but missing")
    }
}

/// A complex number in JSON: `1.5` or `[1.5, -0.2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonComplex {
    Real(f64),
    Pair([f64; 2]),
}

impl From<JsonComplex> for Complex64 {
    fn from(z: JsonComplex) -> Self {
        match z {
            JsonComplex::Real(re) => Complex64::new(re, 0.0),
            JsonComplex::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

impl From<Complex64> for JsonComplex {
    fn from(z: Complex64) -> Self {
        if z.im == 0.0 {
            JsonComplex::Real(z.re)
        } else {
            JsonComplex::Pair([z.re, z.im])
        }
    }
}

fn cvec(v: &[JsonComplex]) -> Vec<Complex64> {
    v.iter().map(|&z| z.into()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledDoc {
    pub grid: Vec<f64>,
    pub values: Vec<Vec<JsonComplex>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum PhiDoc {
    Constant(Vec<JsonComplex>),
    Polynomial(Vec<Vec<JsonComplex>>),
    Sampled(SampledDoc),
}

impl From<&PhiDoc> for HistoryFunction {
    fn from(p: &PhiDoc) -> Self {
        match p {
            PhiDoc::Constant(c) => HistoryFunction::Constant(cvec(c)),
            PhiDoc::Polynomial(cs) => HistoryFunction::Polynomial(cs.iter().map(|c| cvec(c)).collect()),
            PhiDoc::Sampled(s) => HistoryFunction::Sampled {
                grid: s.grid.clone(),
                values: s.values.iter().map(|v| cvec(v)).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JordanBlockDoc {
    pub lambda: JsonComplex,
    pub size: usize,
    pub eta: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JordanDoc {
    pub blocks: Vec<JordanBlockDoc>,
    /// `T`, row by row.
    pub transform: Vec<Vec<JsonComplex>>,
}

/// Uniform grid `start, start + step, …` up to and including `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridDoc {
    pub fn points(&self) -> Result<Vec<f64>, InputError> {
        if !(self.step > 0.0) || !self.step.is_finite() || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(InputError::new("grid", "start, stop must be finite and step > 0"));
        }
        if self.stop < self.start {
            return Err(InputError::new("grid", "stop must be >= start"));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        if n > 10_000_000 {
            return Err(InputError::new("grid", "more than 10^7 points"));
        }
        Ok((0..=n).map(|i| self.start + i as f64 * self.step).collect())
    }
}

/// Settings of the stability experiment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyDoc {
    pub n_histories: Option<usize>,
    pub scale: Option<f64>,
    pub horizon: Option<f64>,
}

/// The input document. Every command reads the fields it needs and ignores the rest.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDoc {
    pub alpha: Option<f64>,
    pub tau: Option<f64>,
    pub beta: Option<f64>,
    pub lambda: Option<JsonComplex>,
    pub lambdas: Option<Vec<JsonComplex>>,
    #[serde(rename = "A")]
    pub a: Option<Vec<Vec<JsonComplex>>>,
    pub jordan: Option<JordanDoc>,
    pub g: Option<NonlinearitySpec>,
    pub phi: Option<PhiDoc>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub h_step: Option<f64>,
    pub gamma: Option<f64>,
    /// Evaluation times.
    pub t: Option<Vec<f64>>,
    /// Alternative to `t`.
    pub grid: Option<GridDoc>,
    pub quad_step: Option<f64>,
    pub window: Option<RootCountWindow>,
    /// Number of boundary samples.
    pub samples: Option<usize>,
    pub verify: Option<VerifyDoc>,
    pub eps_grid: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

fn req<T: Copy>(v: Option<T>, field: &str) -> Result<T, InputError> {
    v.ok_or_else(|| InputError::missing(field))
}

impl InputDoc {
    pub fn from_json(text: &str) -> Result<Self, InputError> {
        serde_json::from_str(text).map_err(|e| InputError::new("<document>", e.to_string()))
    }

    pub fn alpha(&self) -> Result<f64, InputError> {
        let a = req(self.alpha, "alpha")?;
        if !(a > 0.0 && a < 1.0) {
            return Err(InputError::new("alpha", format!("must lie in (0, 1), got {a}")));
        }
        Ok(a)
    }

    pub fn tau(&self) -> Result<f64, InputError> {
        let t = req(self.tau, "tau")?;
        if !(t > 0.0) || !t.is_finite() {
            return Err(InputError::new("tau", format!("must be finite and > 0, got {t}")));
        }
        Ok(t)
    }

    /// `(α, β, λ, τ)`; `β` defaults to 1.
    pub fn ml_params(&self) -> Result<MlParams, InputError> {
        let lambda: Complex64 = req(self.lambda, "lambda")?.into();
        let beta = self.beta.unwrap_or(1.0);
        MlParams::new(self.alpha()?, beta, lambda, self.tau()?).map_err(|e| {
            let field = match &e {
                crate::mlfunc::MlError::InvalidParams { name, .. } => (*name).to_string(),
                _ => "lambda".into(),
            };
            InputError::new(field, e.to_string())
        })
    }

    pub fn region_params(&self) -> Result<RegionParams, InputError> {
        RegionParams::new(self.alpha()?, self.tau()?).map_err(|e| InputError::new("alpha", e.to_string()))
    }

    /// `t`, or the points of `grid`; every time must be finite and `≥ 0`.
    pub fn times(&self) -> Result<Vec<f64>, InputError> {
        let (ts, field) = match (&self.t, &self.grid) {
            (Some(t), _) => (t.clone(), "t"),
            (None, Some(g)) => (g.points()?, "grid"),
            (None, None) => return Err(InputError::missing("t")),
        };
        if ts.is_empty() {
            return Err(InputError::new(field, "no evaluation times"));
        }
        if let Some(bad) = ts.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(InputError::new(field, format!("times must be finite and >= 0, got {bad}")));
        }
        Ok(ts)
    }

    pub fn matrix(&self) -> Result<SystemMatrix, InputError> {
        let rows = self.a.as_ref().ok_or_else(|| InputError::missing("A"))?;
        let rows: Vec<Vec<Complex64>> = rows.iter().map(|r| cvec(r)).collect();
        SystemMatrix::from_rows(&rows).map_err(|e| InputError::new("A", e.to_string()))
    }

    /// `lambdas`, else `[lambda]`, else the eigenvalues of `A`.
    pub fn eigenvalue_list(&self) -> Result<Vec<Complex64>, InputError> {
        if let Some(l) = &self.lambdas {
            if l.is_empty() {
                return Err(InputError::new("lambdas", "empty list"));
            }
            return Ok(cvec(l));
        }
        if let Some(l) = self.lambda {
            return Ok(vec![l.into()]);
        }
        if self.a.is_some() {
            let a = self.matrix()?;
            return matrix_eigenvalues(&a).map_err(|e| InputError::new("A", e.to_string()));
        }
        Err(InputError::missing("lambdas"))
    }

    pub fn jordan_structure(&self) -> Result<Option<JordanStructure>, InputError> {
        let Some(j) = &self.jordan else { return Ok(None) };
        let n = j.transform.len();
        if n == 0 || j.transform.iter().any(|r| r.len() != n) {
            return Err(InputError::new("jordan.transform", "must be a nonempty square matrix"));
        }
        let flat: Vec<Complex64> = j.transform.iter().flat_map(|r| cvec(r)).collect();
        let js = JordanStructure {
            blocks: j
                .blocks
                .iter()
                .map(|b| JordanBlock {
                    lambda: b.lambda.into(),
                    size: b.size,
                    eta: b.eta,
                })
                .collect(),
            transform: DMatrix::from_row_slice(n, n, &flat),
        };
        js.validate().map_err(|e| InputError::new("jordan", e.to_string()))?;
        Ok(Some(js))
    }

    /// The full IVP. `g` defaults to zero, `gamma` to the library default.
    pub fn system(&self) -> Result<DelaySystemSpec, InputError> {
        let a = self.matrix()?;
        let g = self.g.clone().unwrap_or_else(NonlinearitySpec::zero);
        let phi = self.phi.as_ref().ok_or_else(|| InputError::missing("phi"))?;
        let mut spec = DelaySystemSpec::new(
            self.alpha()?,
            self.tau()?,
            a,
            g,
            phi.into(),
            req(self.horizon, "T")?,
            req(self.h_step, "h_step")?,
        );
        spec.gamma = self.gamma.unwrap_or(DEFAULT_GAMMA);
        spec.jordan = self.jordan_structure()?;
        validate_system(&spec)?;
        Ok(spec)
    }
}

/// Runs [`DelaySystemSpec::validate`] and attributes failures to a field.
pub fn validate_system(spec: &DelaySystemSpec) -> Result<(), InputError> {
    use crate::solver::SolverError;
    spec.validate().map_err(|e| {
        let field = match &e {
            SolverError::Quadrature(_) => "h_step",
            SolverError::Nonlinearity(_) => "g",
            SolverError::Linops(_) => "jordan",
            SolverError::InvalidSpec(msg) => match msg.split_whitespace().next().unwrap_or("") {
                w @ ("alpha" | "tau" | "T" | "h_step" | "gamma") => w,
                "history" | "polynomial" | "sampled" => "phi",
                "supplied" => "jordan",
                _ => "<system>",
            },
            _ => "<system>",
        };
        InputError::new(field, e.to_string())
    })
}

/// CSV `t,re,im,abs` of kernel values.
pub fn ml_values_csv(rows: &[(f64, Complex64)]) -> String {
    let mut s = String::from("t,re,im,abs\n");
    for (t, z) in rows {
        let _ = writeln!(s, "{t},{},{},{}", z.re, z.im, z.norm());
    }
    s
}

/// CSV `theta,radius,re,im` of boundary samples.
pub fn boundary_csv(samples: &[BoundarySample]) -> String {
    let mut s = String::from("theta,radius,re,im\n");
    for b in samples {
        let _ = writeln!(s, "{},{},{},{}", b.theta, b.radius, b.point.re, b.point.im);
    }
    s
}

/// Parses [`boundary_csv`] output.
pub fn parse_boundary_csv(text: &str) -> Result<Vec<BoundarySample>, InputError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next() != Some("theta,radius,re,im") {
        return Err(InputError::new("<csv>", "expected header theta,radius,re,im"));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let v: Result<Vec<f64>, _> = l.split(',').map(|f| f.trim().parse::<f64>()).collect();
            match v {
                Ok(v) if v.len() == 4 => Ok(BoundarySample {
                    theta: v[0],
                    radius: v[1],
                    point: Complex64::new(v[2], v[3]),
                }),
                _ => Err(InputError::new("<csv>", format!("bad row {}", i + 1))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::boundary_samples;

    #[test]
    fn complex_entries_accept_reals_and_pairs() {
        let doc = InputDoc::from_json(r#"{"A": [[-1, [0.5, -2]], [0, 3.5]]}"#).unwrap();
        let a = doc.matrix().unwrap();
        assert_eq!(a.entries()[(0, 1)], Complex64::new(0.5, -2.0));
        assert_eq!(a.entries()[(1, 1)], Complex64::new(3.5, 0.0));
    }

    #[test]
    fn full_system_document() {
        let doc = InputDoc::from_json(
            r#"{"alpha": 0.5, "tau": 1, "A": [[-1]], "g": {"kind": "quadratic", "params": [0.05]},
                "phi": {"kind": "sampled", "payload": {"grid": [-1, 0], "values": [[0.1], [0.2]]}},
                "T": 2, "h_step": 0.01}"#,
        )
        .unwrap();
        let s = doc.system().unwrap();
        assert_eq!(s.n_steps().unwrap(), 200);
        let mut v = [Complex64::new(0.0, 0.0)];
        s.phi.eval(-0.5, &mut v);
        assert!((v[0].re - 0.15).abs() < 1e-15);
    }

    #[test]
    fn errors_name_the_field() {
        let doc = InputDoc::from_json(r#"{"alpha": 1.5, "tau": 1, "lambda": -1}"#).unwrap();
        assert_eq!(doc.ml_params().unwrap_err().field, "alpha");
        let doc = InputDoc::from_json(r#"{"alpha": 0.5, "tau": 1, "lambda": -1, "t": [0, -1]}"#).unwrap();
        assert_eq!(doc.times().unwrap_err().field, "t");
        let doc = InputDoc::from_json(
            r#"{"alpha": 0.5, "tau": 1, "A": [[-1]], "phi": {"kind": "constant", "payload": [1]}, "T": 2, "h_step": 0.3}"#,
        )
        .unwrap();
        assert_eq!(doc.system().unwrap_err().field, "h_step");
        assert!(InputDoc::from_json("{not json").is_err());
        assert!(InputDoc::from_json(r#"{"alhpa": 0.5}"#).is_err());
    }

    #[test]
    fn grid_points_include_the_end() {
        let g = GridDoc { start: 0.0, stop: 2.0, step: 0.5 };
        assert_eq!(g.points().unwrap(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn boundary_csv_round_trip() {
        let p = RegionParams::new(0.5, 1.0).unwrap();
        let s = boundary_samples(&p, 17).unwrap();
        let back = parse_boundary_csv(&boundary_csv(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn eigenvalues_of_a_defective_matrix() {
        let doc = InputDoc::from_json(r#"{"A": [[-1, 1], [0, -1]]}"#).unwrap();
        let l = doc.eigenvalue_list().unwrap();
        assert_eq!(l.len(), 2);
        assert!(l.iter().all(|z| (z - Complex64::new(-1.0, 0.0)).norm() < 1e-7));
    }
}
