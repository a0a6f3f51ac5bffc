//! Rate functions by minimizing the action over piecewise-constant controls.
//!
//! `I2(x; A) = inf { ½∫|ψ|² : z^ψ(x) ∈ A }` is approximated by minimizing
//! `action(ψ) + μ · violation(z^ψ)` with Nelder–Mead over controls on a fixed
//! grid, for an increasing schedule of `μ`, from several starting controls.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::coeffs::Coefficients;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::geometry::DomainSpec;
use crate::linalg::{dist, mat_vec, norm, solve};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::rng::{Stream, StreamTag};
use crate::skeleton::{euler_path, Control};
use crate::skorohod::{Grid, Path, ReflectedPath};

/// Constraint sets for the skeleton path `z` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetSpec {
    /// `|z(1) - y| <= radius`
    TerminalPoint { y: Vec<f64>, radius: f64 },
    /// `|z(1) - center| <= radius`
    TerminalSet { center: Vec<f64>, radius: f64 },
    /// `max_k |z(t_k)| >= c`
    PathSupThreshold { c: f64 },
    /// `sup_t |z(t) - f(t)| <= delta`
    Tube { reference: Path, delta: f64 },
}

impl TargetSpec {
    pub fn validate(&self, domain: &DomainSpec) -> Result<()> {
        let radius = match self {
            TargetSpec::TerminalPoint { y: p, radius } | TargetSpec::TerminalSet { center: p, radius } => {
                domain.check_dim(p)?;
                *radius
            }
            TargetSpec::PathSupThreshold { c } => *c,
            TargetSpec::Tube { reference, delta } => {
                if reference.dim != domain.dim() {
                    return Err(Error::DimensionMismatch { expected: domain.dim(), got: reference.dim });
                }
                if !reference.values.chunks_exact(reference.dim).all(|p| domain.contains_unchecked(p)) {
                    return Err(Error::InvalidArgument("tube reference leaves the closed domain".into()));
                }
                *delta
            }
        };
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidArgument(format!("target radius must be nonnegative, got {radius}")));
        }
        Ok(())
    }

    /// Distance-like amount by which `z` misses the target; zero iff `z`
    /// satisfies it.
    pub fn violation(&self, z: &ReflectedPath) -> f64 {
        match self {
            TargetSpec::TerminalPoint { y: p, radius } | TargetSpec::TerminalSet { center: p, radius } => {
                (dist(z.state.last(), p) - radius).max(0.0)
            }
            TargetSpec::PathSupThreshold { c } => {
                let sup = z.state.values.chunks_exact(z.dim()).map(norm).fold(0.0, f64::max);
                (c - sup).max(0.0)
            }
            TargetSpec::Tube { reference, delta } => (z.state.sup_distance(reference) - delta).max(0.0),
        }
    }

    /// A lower bound on the violation of every path from `x0` that stays in
    /// the closed domain; positive means the target is unreachable.
    pub fn geometric_gap(&self, domain: &DomainSpec, x0: &[f64]) -> f64 {
        match self {
            TargetSpec::TerminalPoint { y: p, radius } | TargetSpec::TerminalSet { center: p, radius } => {
                let q = domain.project(p).expect("dimension checked");
                (dist(&q, p) - radius).max(0.0)
            }
            TargetSpec::PathSupThreshold { c } => (c - domain.max_norm()).max(0.0),
            TargetSpec::Tube { reference, delta } => (dist(reference.point(0), x0) - delta).max(0.0),
        }
    }

    /// Path the straight-line seed control tries to follow.
    fn seed_path(&self, domain: &DomainSpec, x0: &[f64]) -> Path {
        let line = |end: Vec<f64>| {
            let grid = Grid::uniform(1).expect("one segment");
            let mut values = x0.to_vec();
            values.extend(end);
            Path::new(grid, x0.len(), values).expect("consistent shape")
        };
        match self {
            TargetSpec::TerminalPoint { y: p, .. } | TargetSpec::TerminalSet { center: p, .. } => {
                line(domain.project(p).expect("dimension checked"))
            }
            TargetSpec::PathSupThreshold { c } => {
                let n = norm(x0);
                let mut u = vec![0.0; x0.len()];
                if n > 0.0 {
                    u.iter_mut().zip(x0).for_each(|(u, x)| *u = x / n);
                } else {
                    u[0] = 1.0;
                }
                let end: Vec<f64> = u.iter().map(|u| u * c).collect();
                line(domain.project(&end).expect("dimension checked"))
            }
            TargetSpec::Tube { reference, .. } => reference.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptConfig {
    /// Dyadic level of the Euler grid used for `z^ψ`.
    pub solver_level: u32,
    pub restarts: usize,
    /// Penalty weights in units of `1 / diam²`, used in order.
    pub penalty_schedule: Vec<f64>,
    /// Defaults to `1e-3 * diam`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasibility_tol: Option<f64>,
    /// Nelder–Mead evaluations per penalty stage; defaults to `400 n + 2000`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_evals: Option<usize>,
    /// Seed for the random restarts; supplied by the caller, not by configs.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            solver_level: 8,
            restarts: 8,
            penalty_schedule: vec![10.0, 1e2, 1e3, 1e4],
            feasibility_tol: None,
            max_evals: None,
            seed: 0,
        }
    }
}

impl OptConfig {
    pub fn tolerance(&self, domain: &DomainSpec) -> f64 {
        self.feasibility_tol.unwrap_or(1e-3 * domain.diameter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub index: usize,
    pub action: f64,
    pub violation: f64,
    pub feasible: bool,
    pub final_penalty: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerTrace {
    pub evaluations: usize,
    pub restarts: usize,
    /// Absolute penalty weight in force when the reported control was found.
    pub final_penalty: f64,
    pub best_restart: usize,
    pub per_restart: Vec<RestartRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    /// `None` stands for `+inf` (no feasible control).
    pub value: Option<f64>,
    pub minimizer: Control,
    pub constraint_violation: f64,
    pub feasibility_tol: f64,
    pub feasible: bool,
    pub trace: OptimizerTrace,
}

impl RateResult {
    pub fn value_or_inf(&self) -> f64 {
        self.value.unwrap_or(f64::INFINITY)
    }
}

/// `½ Σ |ψ_k|² Δt_k`
pub fn action(control: &Control) -> f64 {
    control.action()
}

/// Skeleton path `z^ψ(x0)` on the dyadic grid of `level`.
pub fn skeleton_path(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    x0: &[f64],
    control: &Control,
    level: u32,
) -> Result<ReflectedPath> {
    euler_path(domain, coeffs, x0, &control.resample(&Grid::try_dyadic(level)?))
}

/// Control on `grid` making the Euler skeleton follow `path` when the
/// reflection is inactive: `σ(f_k) ψ_k = (f_{k+1} - f_k)/Δt - b(f_k)`.
fn tracking_control(coeffs: &(impl Coefficients + ?Sized), path: &Path, grid: &Grid) -> Vec<f64> {
    let d = path.dim;
    let mut values = Vec::with_capacity(grid.steps() * d);
    let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
    let mut drift = vec![0.0; d];
    let mut sigma = vec![0.0; d * d];
    for k in 0..grid.steps() {
        let (t0, t1) = (grid.times()[k], grid.times()[k + 1]);
        path.eval(t0, &mut a);
        path.eval(t1, &mut b);
        coeffs.drift(&a, &mut drift);
        coeffs.diffusion(&a, &mut sigma);
        let rhs: Vec<f64> = (0..d).map(|i| (b[i] - a[i]) / (t1 - t0) - drift[i]).collect();
        let psi = solve(&sigma, &rhs).unwrap_or_else(|| {
            // σᵀ rhs as a fallback direction
            let mut st = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    st[i * d + j] = sigma[j * d + i];
                }
            }
            let mut out = vec![0.0; d];
            mat_vec(&st, &rhs, &mut out);
            out
        });
        values.extend(psi);
    }
    values
}

struct StageOutcome {
    values: Vec<f64>,
    action: f64,
    violation: f64,
    penalty: f64,
    evaluations: usize,
}

#[allow(clippy::too_many_arguments)]
fn run_restart(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    x0: &[f64],
    target: &TargetSpec,
    grid: &Grid,
    cfg: &OptConfig,
    tol: f64,
    index: usize,
) -> Result<StageOutcome> {
    let d = domain.dim();
    let n = grid.steps() * d;
    let solver_grid = Grid::try_dyadic(cfg.solver_level)?;
    let start = if index == 0 {
        tracking_control(coeffs, &target.seed_path(domain, x0), grid)
    } else {
        let mut rng = Stream::new(cfg.seed, StreamTag::Optimizer, index as u64);
        (0..n).map(|_| rng.normal()).collect()
    };
    let evaluate = |values: &[f64]| -> (f64, f64) {
        let c = Control { grid: grid.clone(), dim: d, values: values.to_vec() };
        let viol = match euler_path(domain, coeffs, x0, &c.resample(&solver_grid)) {
            Ok(z) => target.violation(&z),
            Err(_) => f64::INFINITY,
        };
        (c.action(), viol)
    };
    let inv_diam_sq = 1.0 / (domain.diameter() * domain.diameter());
    let opts =
        NelderMeadOptions { max_evals: cfg.max_evals.unwrap_or(400 * n + 2000), ..NelderMeadOptions::for_dim(n) };
    let mut current = start.clone();
    let mut evaluations = 0;
    let mut last = None;
    for &mu_rel in &cfg.penalty_schedule {
        let mu = mu_rel * inv_diam_sq;
        let objective = |v: &[f64]| {
            let (a, viol) = evaluate(v);
            a + mu * viol
        };
        // a stage restarts from whichever of the previous result and the
        // initial control is better under the new weight
        if objective(&start) < objective(&current) {
            current.clone_from(&start);
        }
        let mut best = objective(&current);
        for _ in 0..3 {
            let m = nelder_mead(objective, &current, &opts);
            evaluations += m.evals;
            let improved = m.value < best - 1e-12 * (1.0 + best.abs());
            if m.value <= best {
                current = m.x;
                best = m.value;
            }
            if !improved {
                break;
            }
        }
        let (a, viol) = evaluate(&current);
        last = Some(StageOutcome { values: current.clone(), action: a, violation: viol, penalty: mu, evaluations });
        if viol <= tol {
            break;
        }
    }
    let mut out = last.ok_or_else(|| Error::InvalidArgument("empty penalty schedule".into()))?;
    out.evaluations = evaluations;
    Ok(out)
}

/// Minimizes the action over controls on `control_grid` subject to `target`.
/// An unreachable target yields `value = None` (`+inf`), not an error.
pub fn minimize_rate(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    x0: &[f64],
    target: &TargetSpec,
    control_grid: &Grid,
    cfg: &OptConfig,
    exec: &impl Executor,
) -> Result<RateResult> {
    domain.check_dim(x0)?;
    if coeffs.dim() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: coeffs.dim() });
    }
    if !domain.contains_unchecked(x0) {
        return Err(Error::OutsideClosure);
    }
    target.validate(domain)?;
    if cfg.restarts == 0 || cfg.penalty_schedule.is_empty() {
        return Err(Error::InvalidArgument("need at least one restart and one penalty weight".into()));
    }
    let d = domain.dim();
    let tol = cfg.tolerance(domain);

    let gap = target.geometric_gap(domain, x0);
    if gap > tol {
        return Ok(RateResult {
            value: None,
            minimizer: Control::zero(control_grid.clone(), d),
            constraint_violation: gap,
            feasibility_tol: tol,
            feasible: false,
            trace: OptimizerTrace {
                evaluations: 0,
                restarts: 0,
                final_penalty: 0.0,
                best_restart: 0,
                per_restart: Vec::new(),
            },
        });
    }

    let outcomes = exec.map(cfg.restarts, |i| run_restart(domain, coeffs, x0, target, control_grid, cfg, tol, i));
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let per_restart: Vec<RestartRecord> = outcomes
        .iter()
        .enumerate()
        .map(|(index, o)| RestartRecord {
            index,
            action: o.action,
            violation: o.violation,
            feasible: o.violation <= tol,
            final_penalty: o.penalty,
            evaluations: o.evaluations,
        })
        .collect();
    // lowest action among feasible restarts, else lowest violation; ties go
    // to the lower index
    let best = per_restart
        .iter()
        .min_by(|a, b| match (a.feasible, b.feasible) {
            (true, true) => a.action.total_cmp(&b.action),
            (true, false) => core::cmp::Ordering::Less,
            (false, true) => core::cmp::Ordering::Greater,
            (false, false) => a.violation.total_cmp(&b.violation),
        })
        .expect("at least one restart")
        .index;
    let chosen = &outcomes[best];
    let minimizer = Control::new(control_grid.clone(), d, chosen.values.clone())?;
    let feasible = chosen.violation <= tol;
    Ok(RateResult {
        value: feasible.then(|| minimizer.action()),
        minimizer,
        constraint_violation: chosen.violation,
        feasibility_tol: tol,
        feasible,
        trace: OptimizerTrace {
            evaluations: per_restart.iter().map(|r| r.evaluations).sum(),
            restarts: cfg.restarts,
            final_penalty: chosen.penalty,
            best_restart: best,
            per_restart,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusRecord {
    pub radius: f64,
    /// Max over the sampled initial points; `None` is `+inf`.
    pub value: Option<f64>,
    pub argmax: Vec<f64>,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimsupResult {
    pub radii: Vec<RadiusRecord>,
    /// Value at the last radius; `None` is `+inf`.
    pub value: Option<f64>,
    /// Whether the sequence is non-increasing as the radius shrinks.
    pub monotone: bool,
}

/// Initial points used at radius `r`: the center and `samples` points on the
/// sphere of radius `r` (the two points `x0 ± r` in one dimension), dropping
/// those outside the closed domain.
pub fn limsup_samples(
    domain: &DomainSpec,
    x0: &[f64],
    r: f64,
    samples: usize,
    stream_index: u64,
    seed: u64,
) -> Vec<Vec<f64>> {
    let d = x0.len();
    let mut pts = vec![x0.to_vec()];
    if d == 1 {
        pts.push(vec![x0[0] - r]);
        pts.push(vec![x0[0] + r]);
    } else {
        let mut rng = Stream::new(seed, StreamTag::Sampling, stream_index);
        for _ in 0..samples {
            let mut u: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let n = norm(&u);
            u.iter_mut().zip(x0).for_each(|(u, x)| *u = x + r * *u / n);
            pts.push(u);
        }
    }
    pts.retain(|p| domain.contains_unchecked(p));
    pts
}

/// Surrogate for `limsup_{y -> x0} I2(y; target)`: the maximum of
/// [`minimize_rate`] over sampled points at each of the shrinking `radii`.
#[allow(clippy::too_many_arguments)]
pub fn rate_with_initial_limsup(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    x0: &[f64],
    target: &TargetSpec,
    radii: &[f64],
    samples_per_radius: usize,
    control_grid: &Grid,
    cfg: &OptConfig,
    exec: &impl Executor,
) -> Result<LimsupResult> {
    domain.check_dim(x0)?;
    if !domain.contains_unchecked(x0) {
        return Err(Error::OutsideClosure);
    }
    if radii.is_empty() || radii.windows(2).any(|w| w[1] >= w[0]) || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidArgument("radii must be positive and strictly decreasing".into()));
    }
    let mut records = Vec::with_capacity(radii.len());
    for (ri, &r) in radii.iter().enumerate() {
        let pts = limsup_samples(domain, x0, r, samples_per_radius, ri as u64, cfg.seed);
        let results = exec.map(pts.len(), |i| {
            minimize_rate(domain, coeffs, &pts[i], target, control_grid, cfg, &crate::exec::Sequential)
        });
        let mut best: Option<(f64, usize)> = None;
        for (i, res) in results.into_iter().enumerate() {
            let v = res?.value_or_inf();
            if best.is_none_or(|(bv, _)| v > bv) {
                best = Some((v, i));
            }
        }
        let (v, i) = best.expect("center is always sampled");
        records.push(RadiusRecord {
            radius: r,
            value: v.is_finite().then_some(v),
            argmax: pts[i].clone(),
            n_points: pts.len(),
        });
    }
    let monotone =
        records.windows(2).all(|w| w[1].value.unwrap_or(f64::INFINITY) <= w[0].value.unwrap_or(f64::INFINITY));
    Ok(LimsupResult { value: records.last().and_then(|r| r.value), radii: records, monotone })
}
