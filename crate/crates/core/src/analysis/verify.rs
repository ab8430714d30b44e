//! Empirical stability experiments with random histories.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::constants::{compute_constants, ConstantsOptions, StabilityConstants};
use super::decay::linear_fit;
use super::AnalysisError;
use crate::linops::{eigendecompose, DEFAULT_COND_LIMIT};
use crate::region::{count_unstable_roots, in_region, RegionParams};
use crate::solver::{solve_direct, solve_picard, DelaySystemSpec, HistoryFunction, SolverError, Trajectory};

/// A trajectory counts as decayed when `‖x(T)‖∞ < DECAY_RATIO·‖φ‖∞`.
pub const DECAY_RATIO: f64 = 0.01;
/// A trajectory counts as growing when `sup ‖x‖∞ ≥ GROWTH_FACTOR·‖φ‖∞`.
pub const GROWTH_FACTOR: f64 = 10.0;
/// Number of sampled-noise knots on `[−τ, 0]`.
const NOISE_KNOTS: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    StableCertified,
    StableEmpirical,
    UnstableEmpirical,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::StableCertified => "stable_certified",
            Verdict::StableEmpirical => "stable_empirical",
            Verdict::UnstableEmpirical => "unstable_empirical",
            Verdict::Inconclusive => "inconclusive",
        };
        f.write_str(s)
    }
}

/// Whether the history scale was admissible for the certified construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    Certified,
    Empirical,
}

/// Solver used for the simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimSolver {
    #[default]
    Direct,
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryKind {
    Constant,
    Linear,
    SampledNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Simulation horizon; `None` means `max(50τ, 100)`, rounded up to the step.
    pub horizon: Option<f64>,
    pub solver: SimSolver,
    /// `ε` grid for the constants; empty means the default grid.
    pub eps_grid: Vec<f64>,
    pub constants: ConstantsOptions,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
}

impl VerifyOptions {
    pub fn new(seed: u64) -> Self {
        VerifyOptions {
            seed,
            horizon: None,
            solver: SimSolver::Direct,
            eps_grid: Vec::new(),
            constants: ConstantsOptions::default(),
            picard_tol: 1e-12,
            picard_max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueVerdict {
    pub lambda: Complex64,
    pub member: bool,
    pub margin_to_boundary: f64,
    pub arg_ok: bool,
    /// Characteristic roots with `Re s > 0`; absent when the count failed.
    pub unstable_roots: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryOutcome {
    pub kind: HistoryKind,
    pub initial_norm: f64,
    pub sup_norm: f64,
    pub final_norm: f64,
    /// Fitted slope of `log‖x‖` against `log t` on `[T/10, T]`.
    pub decay_slope: Option<f64>,
    pub decayed: bool,
    pub grew: bool,
    /// Time of overflow, when the solver hit it.
    pub overflow_at: Option<f64>,
    pub within_eps: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSummary {
    pub sup_norm: f64,
    pub final_norm: f64,
    /// Largest (slowest) fitted slope over the histories.
    pub decay_slope: Option<f64>,
    pub all_decayed: bool,
    pub any_grew: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub verdict: Verdict,
    pub mode: VerifyMode,
    pub seed: u64,
    pub scale: f64,
    pub horizon: f64,
    pub h_step: f64,
    pub region_verdicts: Vec<EigenvalueVerdict>,
    pub root_count_total: Option<usize>,
    pub constants: Option<StabilityConstants>,
    pub empirical: EmpiricalSummary,
    pub histories: Vec<HistoryOutcome>,
    pub notes: Vec<String>,
}

impl StabilityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}

fn uniform(rng: &mut ChaCha8Rng, real: bool) -> Complex64 {
    let re = rng.random_range(-1.0..=1.0);
    let im = if real { 0.0 } else { rng.random_range(-1.0..=1.0) };
    Complex64::new(re, im)
}

fn normalise(v: &mut [Vec<Complex64>], scale: f64) {
    let sup = v
        .iter()
        .flat_map(|row| row.iter().map(|z| z.norm()))
        .fold(0.0, f64::max);
    let f = if sup > 0.0 { scale / sup } else { 0.0 };
    v.iter_mut().flatten().for_each(|z| *z *= f);
}

/// A random history of the given kind with `‖φ‖∞ = scale` on `[−τ, 0]`.
///
/// Linear histories `a + b·t` attain their sup-norm at the endpoints and sampled ones
/// at a knot, so the normalisation is exact.
pub fn random_history(
    kind: HistoryKind,
    dim: usize,
    tau: f64,
    scale: f64,
    real: bool,
    rng: &mut ChaCha8Rng,
) -> HistoryFunction {
    match kind {
        HistoryKind::Constant => {
            let mut v = vec![(0..dim).map(|_| uniform(rng, real)).collect::<Vec<_>>()];
            normalise(&mut v, scale);
            HistoryFunction::Constant(v.remove(0))
        }
        HistoryKind::Linear => {
            let a: Vec<Complex64> = (0..dim).map(|_| uniform(rng, real)).collect();
            let b: Vec<Complex64> = (0..dim).map(|_| uniform(rng, real)).collect();
            let end: Vec<Complex64> = a.iter().zip(&b).map(|(a, b)| a - b * tau).collect();
            let mut v = vec![a, end];
            normalise(&mut v, scale);
            let slope: Vec<Complex64> = v[0].iter().zip(&v[1]).map(|(a, e)| (a - e) / tau).collect();
            HistoryFunction::Polynomial(vec![v[0].clone(), slope])
        }
        HistoryKind::SampledNoise => {
            let mut values: Vec<Vec<Complex64>> = (0..NOISE_KNOTS)
                .map(|_| (0..dim).map(|_| uniform(rng, real)).collect())
                .collect();
            normalise(&mut values, scale);
            let grid = (0..NOISE_KNOTS)
                .map(|i| {
                    if i + 1 == NOISE_KNOTS {
                        0.0
                    } else {
                        -tau + tau * i as f64 / (NOISE_KNOTS - 1) as f64
                    }
                })
                .collect();
            HistoryFunction::Sampled { grid, values }
        }
    }
}

fn trajectory_slope(tr: &Trajectory) -> Option<f64> {
    let n = tr.len() - 1 - tr.origin;
    if n < 20 {
        return None;
    }
    let (lo, hi) = ((n / 10).max(1), n);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut last = usize::MAX;
    for i in 0..25 {
        let k = ((lo as f64) * ((hi as f64) / lo as f64).powf(i as f64 / 24.0)).round() as usize;
        let k = k.clamp(lo, hi);
        if k == last {
            continue;
        }
        last = k;
        let v = tr.norm_at(tr.origin + k);
        if v > 0.0 && v.is_finite() {
            xs.push(tr.time(tr.origin + k).ln());
            ys.push(v.ln());
        }
    }
    if xs.len() < 3 {
        return None;
    }
    linear_fit(&xs, &ys).map(|f| f.slope)
}

/// Block maxima over the last quarter of the trajectory do not increase.
fn monotone_envelope(tr: &Trajectory) -> bool {
    let start = tr.origin + 3 * (tr.len() - tr.origin) / 4;
    let idx: Vec<usize> = (start..tr.len()).collect();
    if idx.len() < 4 {
        return true;
    }
    let chunk = idx.len() / 4;
    let maxima: Vec<f64> = (0..4)
        .map(|b| {
            let end = if b == 3 { idx.len() } else { (b + 1) * chunk };
            idx[b * chunk..end].iter().map(|&i| tr.norm_at(i)).fold(0.0, f64::max)
        })
        .collect();
    maxima.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9))
}

fn outcome_from(kind: HistoryKind, initial: f64, tr: &Trajectory, eps_x: Option<f64>) -> HistoryOutcome {
    let sup = tr.sup_norm_forward().max(tr.sup_norm_history());
    let fin = tr.final_norm();
    let decayed = if initial > 0.0 {
        fin < DECAY_RATIO * initial && monotone_envelope(tr)
    } else {
        fin == 0.0
    };
    HistoryOutcome {
        kind,
        initial_norm: initial,
        sup_norm: sup,
        final_norm: fin,
        decay_slope: trajectory_slope(tr),
        decayed,
        grew: initial > 0.0 && sup >= GROWTH_FACTOR * initial,
        overflow_at: None,
        within_eps: eps_x.map(|e| sup <= e),
        error: None,
    }
}

fn simulate(
    spec: &DelaySystemSpec,
    kind: HistoryKind,
    initial: f64,
    opts: &VerifyOptions,
    eps_x: Option<f64>,
) -> Result<HistoryOutcome, AnalysisError> {
    let res = match opts.solver {
        SimSolver::Direct => solve_direct(spec),
        SimSolver::Picard => solve_picard(spec, opts.picard_tol, opts.picard_max_iter).map(|(t, _)| t),
    };
    match res {
        Ok(tr) => Ok(outcome_from(kind, initial, &tr, eps_x)),
        Err(SolverError::Overflow { t, partial }) => {
            let mut o = outcome_from(kind, initial, &partial, eps_x);
            o.decayed = false;
            o.grew = true;
            o.overflow_at = Some(t);
            o.within_eps = eps_x.map(|_| false);
            Ok(o)
        }
        Err(e @ (SolverError::InnerIteration { .. } | SolverError::NoConvergence { .. })) => Ok(HistoryOutcome {
            kind,
            initial_norm: initial,
            sup_norm: f64::NAN,
            final_norm: f64::NAN,
            decay_slope: None,
            decayed: false,
            grew: false,
            overflow_at: None,
            within_eps: None,
            error: Some(e.to_string()),
        }),
        Err(e) => Err(e.into()),
    }
}

/// Simulates `n_histories` random histories with `‖φ‖∞ = scale` (cycling through
/// constant, linear and sampled-noise kinds) and classifies the outcome.
///
/// - `unstable_empirical`: some trajectory grew by [`GROWTH_FACTOR`] or overflowed.
/// - `stable_certified`: every eigenvalue lies in `S_{α,τ}` with no unstable root, the
///   constants exist, `scale ≤ δ_x`, and every trajectory stayed within `ε_x`.
/// - `stable_empirical`: every trajectory decayed below [`DECAY_RATIO`] of its
///   initial norm with a nonincreasing envelope over the last quarter.
/// - `inconclusive`: anything else.
///
/// Non-finite norms of failed simulations are serialized as `null`.
pub fn verify_stability(
    spec: &DelaySystemSpec,
    n_histories: usize,
    scale: f64,
    opts: &VerifyOptions,
) -> Result<StabilityReport, AnalysisError> {
    spec.validate()?;
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(AnalysisError::Domain(format!("scale must be finite and >= 0, got {scale}")));
    }
    if n_histories == 0 {
        return Err(AnalysisError::Domain("need at least one history".into()));
    }
    let mut notes = Vec::new();
    let h = spec.h_step;
    let horizon = {
        let target = opts.horizon.unwrap_or((50.0 * spec.tau).max(100.0));
        if !(target > 0.0) || !target.is_finite() {
            return Err(AnalysisError::Domain(format!("horizon must be > 0, got {target}")));
        }
        (target / h - 1e-9).ceil().max(1.0) * h
    };
    let sim = spec.with_grid(horizon, h);
    sim.validate()?;

    let eigenvalues = match &spec.jordan {
        Some(j) => j.eigenvalues(),
        None => eigendecompose(&spec.a, DEFAULT_COND_LIMIT)?.eigenvalues(),
    };
    let rp = RegionParams::new(spec.alpha, spec.tau)?;
    let mut cache: Vec<(Complex64, Option<usize>)> = Vec::new();
    let mut region_verdicts = Vec::with_capacity(eigenvalues.len());
    for &lambda in &eigenvalues {
        let v = in_region(lambda, &rp);
        let roots = match cache.iter().find(|(l, _)| *l == lambda) {
            Some((_, r)) => *r,
            None => {
                let r = match count_unstable_roots(lambda, &rp) {
                    Ok(n) => Some(n),
                    Err(e) => {
                        notes.push(format!("root count for lambda = {lambda} failed: {e}"));
                        None
                    }
                };
                cache.push((lambda, r));
                r
            }
        };
        region_verdicts.push(EigenvalueVerdict {
            lambda,
            member: v.member,
            margin_to_boundary: v.margin_to_boundary,
            arg_ok: v.arg_ok,
            unstable_roots: roots,
        });
    }
    let root_count_total = region_verdicts
        .iter()
        .map(|v| v.unstable_roots)
        .sum::<Option<usize>>();
    let all_members = region_verdicts.iter().all(|v| v.member);
    if let Some(total) = root_count_total {
        if all_members != (total == 0) {
            notes.push(format!(
                "region test and root count disagree: members = {all_members}, unstable roots = {total}"
            ));
        }
    }

    let constants = match compute_constants(spec, &opts.eps_grid, &opts.constants) {
        Ok(c) => Some(c),
        Err(e @ (AnalysisError::OutsideRegion { .. } | AnalysisError::NoContraction { .. })) => {
            notes.push(format!("constants unavailable: {e}"));
            None
        }
        Err(e) => return Err(e),
    };
    if !spec.g.satisfies_h2() {
        notes.push(format!(
            "nonlinearity `{}` does not vanish to first order; the construction does not apply",
            spec.g.kind
        ));
    }
    let certified_setup = match &constants {
        Some(c) if scale <= c.delta_x && all_members && root_count_total == Some(0) && spec.g.satisfies_h2() => {
            true
        }
        Some(c) => {
            if scale > c.delta_x {
                notes.push(format!(
                    "scale {scale:.3e} exceeds the admissible history radius {:.3e}; empirical mode",
                    c.delta_x
                ));
            }
            false
        }
        None => false,
    };
    let mode = if certified_setup {
        VerifyMode::Certified
    } else {
        VerifyMode::Empirical
    };
    let eps_x = if certified_setup {
        constants.as_ref().map(|c| c.eps_x)
    } else {
        None
    };

    let kinds = [HistoryKind::Constant, HistoryKind::Linear, HistoryKind::SampledNoise];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let real = spec.is_real();
    let jobs: Vec<(HistoryKind, DelaySystemSpec)> = (0..n_histories)
        .map(|i| {
            let kind = kinds[i % kinds.len()];
            let phi = random_history(kind, spec.dim(), spec.tau, scale, real, &mut rng);
            let mut s = sim.clone();
            s.phi = phi;
            (kind, s)
        })
        .collect();

    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len());
    let chunk = jobs.len().div_ceil(workers);
    let results: Vec<Result<HistoryOutcome, AnalysisError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|(kind, s)| simulate(s, *kind, scale, opts, eps_x))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });
    let histories: Vec<HistoryOutcome> = results.into_iter().collect::<Result<_, _>>()?;

    let finite_max = |f: fn(&HistoryOutcome) -> f64| {
        histories
            .iter()
            .map(f)
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max)
    };
    let empirical = EmpiricalSummary {
        sup_norm: finite_max(|o| o.sup_norm),
        final_norm: finite_max(|o| o.final_norm),
        decay_slope: histories
            .iter()
            .filter_map(|o| o.decay_slope)
            .reduce(f64::max),
        all_decayed: histories.iter().all(|o| o.decayed),
        any_grew: histories.iter().any(|o| o.grew),
    };
    for (i, o) in histories.iter().enumerate() {
        if let Some(e) = &o.error {
            notes.push(format!("history {i}: {e}"));
        }
        if o.within_eps == Some(false) {
            notes.push(format!(
                "history {i} left the eps ball (sup {:.3e} > {:.3e})",
                o.sup_norm,
                eps_x.unwrap_or(f64::NAN)
            ));
        }
    }
    let failed = histories.iter().any(|o| o.error.is_some());
    let verdict = if empirical.any_grew {
        Verdict::UnstableEmpirical
    } else if certified_setup && !failed && histories.iter().all(|o| o.within_eps == Some(true)) {
        Verdict::StableCertified
    } else if !failed && empirical.all_decayed {
        Verdict::StableEmpirical
    } else {
        Verdict::Inconclusive
    };
    if verdict == Verdict::StableCertified && !empirical.all_decayed {
        notes.push(format!(
            "certified, but not every trajectory fell below {DECAY_RATIO} of its initial norm by t = {horizon}"
        ));
    }
    Ok(StabilityReport {
        verdict,
        mode,
        seed: opts.seed,
        scale,
        horizon,
        h_step: h,
        region_verdicts,
        root_count_total,
        constants,
        empirical,
        histories,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::SystemMatrix;
    use crate::nonlinearity::{NonlinearityKind, NonlinearitySpec};

    fn scalar(lambda: f64, g: NonlinearitySpec, h: f64) -> DelaySystemSpec {
        DelaySystemSpec::new(
            0.5,
            1.0,
            SystemMatrix::diagonal(&[Complex64::new(lambda, 0.0)]).unwrap(),
            g,
            HistoryFunction::zero(1),
            1.0,
            h,
        )
    }

    #[test]
    fn histories_have_the_requested_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in [HistoryKind::Constant, HistoryKind::Linear, HistoryKind::SampledNoise] {
            for real in [true, false] {
                let phi = random_history(kind, 3, 0.7, 0.25, real, &mut rng);
                assert!(phi.validate(0.7).is_ok());
                assert!((phi.sup_norm(0.7) - 0.25).abs() < 1e-12, "{kind:?}");
                assert_eq!(phi.is_real(), real);
            }
        }
    }

    #[test]
    fn zero_scale_gives_zero_norms() {
        let spec = scalar(-1.0, NonlinearitySpec::zero(), 0.05);
        let r = verify_stability(&spec, 3, 0.0, &VerifyOptions::new(1)).unwrap();
        assert!(r.histories.iter().all(|o| o.sup_norm == 0.0 && o.final_norm == 0.0));
        assert_eq!(r.verdict, Verdict::StableCertified);
        assert_eq!(r.root_count_total, Some(0));
    }

    #[test]
    fn positive_lambda_is_unstable() {
        let spec = scalar(1.0, NonlinearitySpec::zero(), 0.05);
        let r = verify_stability(&spec, 3, 0.1, &VerifyOptions::new(3)).unwrap();
        assert_eq!(r.verdict, Verdict::UnstableEmpirical);
        assert!(r.constants.is_none());
        assert_eq!(r.root_count_total, Some(1));
        assert!(!r.region_verdicts[0].member);
    }

    #[test]
    fn certified_quadratic_example_is_deterministic() {
        let g = NonlinearitySpec::new(NonlinearityKind::Quadratic, vec![0.05]);
        let spec = scalar(-1.0, g, 0.05);
        let c = compute_constants(&spec, &[], &ConstantsOptions::default()).unwrap();
        let opts = VerifyOptions::new(42);
        let a = verify_stability(&spec, 4, c.delta_x, &opts).unwrap();
        assert_eq!(a.mode, VerifyMode::Certified);
        assert_eq!(a.verdict, Verdict::StableCertified);
        assert!(a.histories.iter().all(|o| o.sup_norm <= c.eps_x));
        let b = verify_stability(&spec, 4, c.delta_x, &opts).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }
}
