//! Monte Carlo probes of the small-noise asymptotics: slope curves
//! `-eps log P(event)` against variational predictions, coupled Euler
//! approximation errors, anticipated initial conditions, and uniformity over
//! sets of initial points.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::brownian::{aggregate, fill_increments, BridgeBuffers};
use crate::coeffs::Coefficients;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::geometry::DomainSpec;
use crate::linalg::{dist, norm};
use crate::rate::{minimize_rate, OptConfig, RateResult, TargetSpec};
use crate::sde::{
    drive_with_increments, sample_initial_unchecked, InitialLaw, NoiseConfig, SimWorkspace, REFERENCE_LEVEL,
};
use crate::skorohod::{Grid, Path, ReflectedPath};

/// Paths per parallel work item. Counts are summed as integers, so the
/// chunking never affects results.
const CHUNK: usize = 1024;

/// Closed path events, evaluated on grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EventSpec {
    /// `max_k |X(t_k)| >= c`
    SupExceeds { c: f64 },
    /// `|X(1) - center| <= radius`
    TerminalIn { center: Vec<f64>, radius: f64 },
    /// `sup_t |X(t) - f(t)| <= delta`, or its complement when `negated`.
    TubeStays {
        reference: Path,
        delta: f64,
        #[serde(default)]
        negated: bool,
    },
}

impl EventSpec {
    pub fn holds(&self, x: &ReflectedPath) -> bool {
        match self {
            EventSpec::SupExceeds { c } => x.state.values.chunks_exact(x.dim()).any(|p| norm(p) >= *c),
            EventSpec::TerminalIn { center, radius } => dist(x.state.last(), center) <= *radius,
            EventSpec::TubeStays { reference, delta, negated } => {
                (x.state.sup_distance(reference) <= *delta) != *negated
            }
        }
    }

    pub fn validate(&self, domain: &DomainSpec) -> Result<()> {
        match self {
            EventSpec::SupExceeds { c } if !c.is_finite() => {
                Err(Error::InvalidArgument("event level must be finite".into()))
            }
            EventSpec::TerminalIn { center, radius } => {
                domain.check_dim(center)?;
                if !(radius.is_finite() && *radius >= 0.0) {
                    return Err(Error::InvalidArgument("event radius must be nonnegative".into()));
                }
                Ok(())
            }
            EventSpec::TubeStays { reference, delta, .. } => {
                if reference.dim != domain.dim() {
                    return Err(Error::DimensionMismatch { expected: domain.dim(), got: reference.dim });
                }
                if !(delta.is_finite() && *delta >= 0.0) {
                    return Err(Error::InvalidArgument("tube radius must be nonnegative".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// The same set as a constraint on skeleton paths.
    pub fn to_target(&self) -> Result<TargetSpec> {
        match self {
            EventSpec::SupExceeds { c } => Ok(TargetSpec::PathSupThreshold { c: *c }),
            EventSpec::TerminalIn { center, radius } => {
                Ok(TargetSpec::TerminalSet { center: center.clone(), radius: *radius })
            }
            EventSpec::TubeStays { reference, delta, negated: false } => {
                Ok(TargetSpec::Tube { reference: reference.clone(), delta: *delta })
            }
            EventSpec::TubeStays { negated: true, .. } => {
                Err(Error::NotConvertible("the complement of a tube has no target representation".into()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub epsilon: f64,
    pub p_hat: f64,
    pub std_err: f64,
    pub n_paths: u64,
    pub hits: u64,
    /// `-eps log p_hat`; `None` when no path hit.
    pub slope: Option<f64>,
    /// `eps std_err / p_hat`
    pub slope_err: Option<f64>,
}

impl McEstimate {
    pub fn from_counts(epsilon: f64, hits: u64, n_paths: u64) -> Self {
        let p = hits as f64 / n_paths as f64;
        let std_err = libm::sqrt(p * (1.0 - p) / n_paths as f64);
        let (slope, slope_err) =
            if hits > 0 { (Some(-epsilon * libm::log(p)), Some(epsilon * std_err / p)) } else { (None, None) };
        Self { epsilon, p_hat: p, std_err, n_paths, hits, slope, slope_err }
    }
}

fn check_setup(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    initial: &InitialLaw,
    event: &EventSpec,
    n_paths: u64,
) -> Result<()> {
    if coeffs.dim() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: coeffs.dim() });
    }
    initial.validate(domain)?;
    event.validate(domain)?;
    if n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be positive".into()));
    }
    Ok(())
}

/// Counts hits over paths `0..n_paths` of the noise stream `noise.seed`
/// (`noise.path_index` is ignored). With a shifted law, path `i` starts
/// from its own draw of `X0` and is driven by Brownian path `i`.
pub fn estimate_probability(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    initial: &InitialLaw,
    event: &EventSpec,
    noise: &NoiseConfig,
    n_paths: u64,
    exec: &impl Executor,
) -> Result<McEstimate> {
    noise.validate()?;
    check_setup(domain, coeffs, initial, event, n_paths)?;
    let grid = Grid::try_dyadic(noise.level)?;
    let n_chunks = n_paths.div_ceil(CHUNK as u64) as usize;
    let counts = exec.map(n_chunks, |c| -> Result<u64> {
        let mut ws = SimWorkspace::new();
        let mut bufs = BridgeBuffers::default();
        let mut incs = Vec::new();
        let mut path = ReflectedPath::zeros(grid.clone(), domain.dim());
        let lo = c as u64 * CHUNK as u64;
        let hi = (lo + CHUNK as u64).min(n_paths);
        let mut hits = 0;
        for i in lo..hi {
            let x0 = sample_initial_unchecked(initial, domain, noise.epsilon, noise.seed, i);
            fill_increments(noise.seed, i, noise.level, domain.dim(), &mut incs, &mut bufs);
            drive_with_increments(domain, coeffs, &x0, noise.epsilon, &incs, &mut ws, &mut path)?;
            hits += u64::from(event.holds(&path));
        }
        Ok(hits)
    });
    let hits = counts.into_iter().sum::<Result<u64>>()?;
    Ok(McEstimate::from_counts(noise.epsilon, hits, n_paths))
}

/// Settings for the variational prediction attached to a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSetup {
    pub control_grid: Grid,
    pub opt: OptConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpCurve {
    pub estimates: Vec<McEstimate>,
    pub prediction: Option<RateResult>,
    /// Whether the slopes strictly increase as `eps` decreases (all defined).
    pub slopes_increasing: bool,
    /// `|slope - prediction| / prediction` at the smallest `eps`.
    pub final_relative_error: Option<f64>,
}

fn predict(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    x0: &[f64],
    event: &EventSpec,
    setup: Option<&PredictionSetup>,
    exec: &impl Executor,
) -> Result<Option<RateResult>> {
    let Some(setup) = setup else { return Ok(None) };
    let target = match event.to_target() {
        Ok(t) => t,
        Err(Error::NotConvertible(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    minimize_rate(domain, coeffs, x0, &target, &setup.control_grid, &setup.opt, exec).map(Some)
}

fn check_epsilons(epsilons: &[f64]) -> Result<()> {
    if epsilons.is_empty() || epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("epsilons must be non-empty and strictly decreasing".into()));
    }
    Ok(())
}

fn slopes_increasing(estimates: &[McEstimate]) -> bool {
    estimates.iter().all(|e| e.slope.is_some())
        && estimates.windows(2).all(|w| w[1].slope.unwrap() > w[0].slope.unwrap())
}

/// Slope estimates at each `eps` (same seed throughout, so the curve uses
/// common random numbers) beside the predicted rate at the law's center.
#[allow(clippy::too_many_arguments)]
pub fn ldp_curve(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    initial: &InitialLaw,
    event: &EventSpec,
    epsilons: &[f64],
    n_paths: u64,
    level: u32,
    seed: u64,
    prediction: Option<&PredictionSetup>,
    exec: &impl Executor,
) -> Result<LdpCurve> {
    check_epsilons(epsilons)?;
    let mut estimates = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let noise = NoiseConfig::new(eps, level, seed, 0)?;
        estimates.push(estimate_probability(domain, coeffs, initial, event, &noise, n_paths, exec)?);
    }
    let prediction = predict(domain, coeffs, initial.x0(), event, prediction, exec)?;
    let final_relative_error = match (&prediction, estimates.last().and_then(|e| e.slope)) {
        (Some(RateResult { value: Some(v), .. }), Some(s)) if *v > 0.0 => Some((s - v).abs() / v),
        _ => None,
    };
    Ok(LdpCurve { slopes_increasing: slopes_increasing(&estimates), estimates, prediction, final_relative_error })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpApproxRow {
    pub level: u32,
    pub p_hat: f64,
    pub std_err: f64,
    pub hits: u64,
    pub n_paths: u64,
    pub mean_sup_diff: f64,
    pub max_sup_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpApproxTable {
    pub epsilon: f64,
    pub delta: f64,
    pub reference_level: u32,
    pub rows: Vec<ExpApproxRow>,
    pub strictly_decreasing: bool,
}

/// Estimates `P{ sup_t |X(t) - X_n(t)| >= delta }` where `X` is the
/// reference-level scheme and `X_n` the level-`n` scheme driven by the
/// aggregated increments of the same Brownian path. Both are compared as
/// piecewise-linear paths.
#[allow(clippy::too_many_arguments)]
pub fn exp_approx_probe(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    x0: &[f64],
    delta: f64,
    levels: &[u32],
    epsilon: f64,
    n_paths: u64,
    seed: u64,
    exec: &impl Executor,
) -> Result<ExpApproxTable> {
    check_setup(domain, coeffs, &InitialLaw::deterministic(x0), &EventSpec::SupExceeds { c: 0.0 }, n_paths)?;
    NoiseConfig::new(epsilon, REFERENCE_LEVEL, seed, 0)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    if let Some(l) = levels.iter().find(|l| **l > REFERENCE_LEVEL) {
        return Err(Error::InvalidArgument(format!("level {l} exceeds the reference level {REFERENCE_LEVEL}")));
    }
    let d = domain.dim();
    let n_chunks = n_paths.div_ceil(CHUNK as u64) as usize;
    // per chunk: (hits, sum of sup diffs, max sup diff) per level
    let parts = exec.map(n_chunks, |c| -> Result<Vec<(u64, f64, f64)>> {
        let mut ws = SimWorkspace::new();
        let mut bufs = BridgeBuffers::default();
        let mut fine_incs = Vec::new();
        let mut fine = ReflectedPath::zeros(Grid::dyadic(REFERENCE_LEVEL), d);
        let mut coarse: Vec<ReflectedPath> = levels.iter().map(|l| ReflectedPath::zeros(Grid::dyadic(*l), d)).collect();
        let mut acc = vec![(0u64, 0.0, 0.0f64); levels.len()];
        let lo = c as u64 * CHUNK as u64;
        let hi = (lo + CHUNK as u64).min(n_paths);
        for i in lo..hi {
            fill_increments(seed, i, REFERENCE_LEVEL, d, &mut fine_incs, &mut bufs);
            drive_with_increments(domain, coeffs, x0, epsilon, &fine_incs, &mut ws, &mut fine)?;
            for (j, &l) in levels.iter().enumerate() {
                let diff = if l == REFERENCE_LEVEL {
                    0.0
                } else {
                    let incs = aggregate(&fine_incs, d, REFERENCE_LEVEL, l);
                    drive_with_increments(domain, coeffs, x0, epsilon, &incs, &mut ws, &mut coarse[j])?;
                    coarse[j].state.sup_distance(&fine.state)
                };
                acc[j].0 += u64::from(diff >= delta);
                acc[j].1 += diff;
                acc[j].2 = acc[j].2.max(diff);
            }
        }
        Ok(acc)
    });
    let mut totals = vec![(0u64, 0.0, 0.0f64); levels.len()];
    for part in parts {
        for (t, p) in totals.iter_mut().zip(part?) {
            t.0 += p.0;
            t.1 += p.1;
            t.2 = t.2.max(p.2);
        }
    }
    let rows: Vec<ExpApproxRow> = levels
        .iter()
        .zip(&totals)
        .map(|(&level, &(hits, sum, max))| {
            let e = McEstimate::from_counts(epsilon, hits, n_paths);
            ExpApproxRow {
                level,
                p_hat: e.p_hat,
                std_err: e.std_err,
                hits,
                n_paths,
                mean_sup_diff: sum / n_paths as f64,
                max_sup_diff: max,
            }
        })
        .collect();
    let strictly_decreasing = rows.windows(2).all(|w| w[1].level > w[0].level && w[1].p_hat < w[0].p_hat);
    Ok(ExpApproxTable { epsilon, delta, reference_level: REFERENCE_LEVEL, rows, strictly_decreasing })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnticipatedRow {
    pub epsilon: f64,
    pub fixed: McEstimate,
    pub shifted: McEstimate,
    /// `slope_shifted - slope_fixed`
    pub slope_diff: Option<f64>,
    /// `sqrt(err_fixed² + err_shifted²)`
    pub combined_slope_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnticipatedTable {
    pub rows: Vec<AnticipatedRow>,
    pub prediction: Option<RateResult>,
}

/// Runs each `eps` twice on the same Brownian paths: from the fixed center
/// `x0` of `law`, and from the random start `X0^eps` drawn from `law`.
#[allow(clippy::too_many_arguments)]
pub fn anticipated_experiment(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    law: &InitialLaw,
    event: &EventSpec,
    epsilons: &[f64],
    n_paths: u64,
    level: u32,
    seed: u64,
    prediction: Option<&PredictionSetup>,
    exec: &impl Executor,
) -> Result<AnticipatedTable> {
    check_epsilons(epsilons)?;
    law.validate(domain)?;
    let fixed_law = InitialLaw::deterministic(law.x0());
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let noise = NoiseConfig::new(eps, level, seed, 0)?;
        let fixed = estimate_probability(domain, coeffs, &fixed_law, event, &noise, n_paths, exec)?;
        let shifted = estimate_probability(domain, coeffs, law, event, &noise, n_paths, exec)?;
        let slope_diff = fixed.slope.zip(shifted.slope).map(|(a, b)| b - a);
        let combined_slope_err = fixed.slope_err.zip(shifted.slope_err).map(|(a, b)| libm::sqrt(a * a + b * b));
        rows.push(AnticipatedRow { epsilon: eps, fixed, shifted, slope_diff, combined_slope_err });
    }
    let prediction = predict(domain, coeffs, law.x0(), event, prediction, exec)?;
    Ok(AnticipatedTable { rows, prediction })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformPoint {
    pub x0: Vec<f64>,
    pub estimate: McEstimate,
    /// Predicted rate; `None` when unavailable or `+inf`.
    pub prediction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformProbe {
    pub epsilon: f64,
    pub points: Vec<UniformPoint>,
    pub slope_min: Option<f64>,
    pub slope_max: Option<f64>,
    pub prediction_min: Option<f64>,
    pub prediction_max: Option<f64>,
}

/// Slopes from every point of `k` on shared noise, with the per-point
/// predictions and their extremes over `k`.
#[allow(clippy::too_many_arguments)]
pub fn uniform_probe(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    k: &[Vec<f64>],
    event: &EventSpec,
    epsilon: f64,
    n_paths: u64,
    level: u32,
    seed: u64,
    prediction: Option<&PredictionSetup>,
    exec: &impl Executor,
) -> Result<UniformProbe> {
    if k.is_empty() {
        return Err(Error::InvalidArgument("the set of initial points is empty".into()));
    }
    let noise = NoiseConfig::new(epsilon, level, seed, 0)?;
    let mut points = Vec::with_capacity(k.len());
    for x0 in k {
        let law = InitialLaw::deterministic(x0);
        let estimate = estimate_probability(domain, coeffs, &law, event, &noise, n_paths, exec)?;
        let prediction = predict(domain, coeffs, x0, event, prediction, exec)?.and_then(|r| r.value);
        points.push(UniformPoint { x0: x0.clone(), estimate, prediction });
    }
    let extreme = |vals: Vec<Option<f64>>, pick: fn(f64, f64) -> f64| -> Option<f64> {
        vals.into_iter().try_fold(None, |acc: Option<f64>, v| v.map(|v| Some(acc.map_or(v, |a| pick(a, v)))))?
    };
    let slopes: Vec<Option<f64>> = points.iter().map(|p| p.estimate.slope).collect();
    let preds: Vec<Option<f64>> = points.iter().map(|p| p.prediction).collect();
    Ok(UniformProbe {
        epsilon,
        slope_min: extreme(slopes.clone(), f64::min),
        slope_max: extreme(slopes, f64::max),
        prediction_min: extreme(preds.clone(), f64::min),
        prediction_max: extreme(preds, f64::max),
        points,
    })
}
