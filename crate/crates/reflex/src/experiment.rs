//! Dispatch from a validated config to the numerical kernels.

use reflex_core::ldp::{
    anticipated_experiment, exp_approx_probe, ldp_curve, uniform_probe, AnticipatedTable, ExpApproxTable, LdpCurve,
    PredictionSetup, UniformProbe,
};
use reflex_core::rate::{minimize_rate, rate_with_initial_limsup, LimsupResult, RateResult, TargetSpec};
use reflex_core::sde::{simulate_reflected, NoiseConfig};
use reflex_core::skeleton::{euler_skeleton, picard_solve, Control, PicardOptions, SkeletonSolution};
use reflex_core::{CoefficientField, DomainSpec, Executor, Grid, ReflectedPath};
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig, PredictionConfig, SkeletonMethod};
use crate::error::RunError;
use crate::validate::validate;

pub const RESULT_FORMAT: &str = "reflex-result";
pub const RESULT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub format: String,
    pub version: u32,
    /// The fully resolved config, including any seed override.
    pub config: ExperimentConfig,
    pub result: ExperimentResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub path_index: u64,
    pub final_state: Vec<f64>,
    pub total_local_time: f64,
    /// Largest distance from the starting point.
    pub max_excursion: f64,
    /// Number of steps on which the boundary pushed.
    pub pushes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelGap {
    pub level: u32,
    /// Sup distance between the Euler skeletons at `level` and the next listed level.
    pub sup_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonOutcome {
    pub picard: Option<SkeletonSolution>,
    pub euler: Option<SkeletonSolution>,
    pub action: f64,
    /// `|picard - euler|_inf` when both were computed.
    pub sup_difference: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub convergence: Vec<LevelGap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCaseResult {
    pub x0: Vec<f64>,
    pub target: TargetSpec,
    pub result: RateResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limsup: Option<LimsupResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
#[allow(clippy::large_enum_variant)]
pub enum ExperimentResult {
    Simulate {
        epsilon: f64,
        level: u32,
        paths: Vec<PathSummary>,
        /// Full paths, kept out of the JSON and written as CSV.
        #[serde(skip)]
        full: Vec<(u64, ReflectedPath)>,
    },
    Skeleton(SkeletonOutcome),
    Rate {
        cases: Vec<RateCaseResult>,
    },
    LdpCurve(LdpCurve),
    ExpApprox(ExpApproxTable),
    Anticipated(AnticipatedTable),
    Uniform(UniformProbe),
}

/// Validates `cfg` and runs its experiment.
pub fn run(cfg: &ExperimentConfig, exec: &impl Executor) -> Result<ResultDocument, RunError> {
    let report = validate(cfg);
    if !report.ok {
        return Err(RunError::Invalid(Box::new(report)));
    }
    let domain = cfg.domain.build()?;
    let coeffs = CoefficientField::from_preset(&cfg.coefficients, &domain)?;
    let result = dispatch(cfg, &domain, &coeffs, exec)?;
    Ok(ResultDocument { format: RESULT_FORMAT.into(), version: RESULT_VERSION, config: cfg.clone(), result })
}

fn prediction_setup(p: &PredictionConfig, seed: u64) -> Result<Option<PredictionSetup>, RunError> {
    if !p.enabled {
        return Ok(None);
    }
    let mut opt = p.opt.clone();
    opt.seed = seed;
    Ok(Some(PredictionSetup { control_grid: Grid::uniform(p.control_segments)?, opt }))
}

fn summarize(path_index: u64, x0: &[f64], z: &ReflectedPath) -> PathSummary {
    let excursion = (0..z.len())
        .map(|k| z.state.point(k).iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    PathSummary {
        path_index,
        final_state: z.state.last().to_vec(),
        total_local_time: z.total_local_time(),
        max_excursion: excursion,
        pushes: (1..z.len()).filter(|&k| z.local_time_increment(k).iter().any(|v| *v != 0.0)).count(),
    }
}

fn dispatch(
    cfg: &ExperimentConfig,
    domain: &DomainSpec,
    coeffs: &CoefficientField,
    exec: &impl Executor,
) -> Result<ExperimentResult, RunError> {
    let seed = cfg.seed;
    Ok(match &cfg.experiment {
        Experiment::Simulate { x0, epsilon, level, first_path, n_paths } => {
            let full = exec
                .map(*n_paths as usize, |i| {
                    let idx = first_path + i as u64;
                    let noise = NoiseConfig::new(*epsilon, *level, seed, idx)?;
                    simulate_reflected(domain, coeffs, x0, &noise).map(|z| (idx, z))
                })
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?;
            let paths = full.iter().map(|(i, z)| summarize(*i, x0, z)).collect();
            ExperimentResult::Simulate { epsilon: *epsilon, level: *level, paths, full }
        }
        Experiment::Skeleton { x0, control, method, level, convergence_levels } => {
            let d = domain.dim();
            let flat: Vec<f64> = control.iter().flatten().copied().collect();
            let control = Control::new(Grid::uniform(control.len())?, d, flat)?;
            let picard = match method {
                SkeletonMethod::Euler => None,
                _ => Some(picard_solve(
                    domain,
                    coeffs,
                    x0,
                    &control,
                    &Grid::try_dyadic(*level)?,
                    PicardOptions::for_domain(domain),
                )?),
            };
            let euler = match method {
                SkeletonMethod::Picard => None,
                _ => Some(euler_skeleton(domain, coeffs, x0, &control, *level)?),
            };
            let sup_difference = match (&picard, &euler) {
                (Some(p), Some(e)) => Some(p.z.state.sup_distance(&e.z.state)),
                _ => None,
            };
            let paths = convergence_levels
                .iter()
                .map(|l| euler_skeleton(domain, coeffs, x0, &control, *l))
                .collect::<Result<Vec<_>, _>>()?;
            let convergence = convergence_levels
                .windows(2)
                .zip(paths.windows(2))
                .map(|(l, p)| LevelGap { level: l[0], sup_diff: p[1].z.state.sup_distance(&p[0].z.state) })
                .collect();
            ExperimentResult::Skeleton(SkeletonOutcome {
                action: control.action(),
                picard,
                euler,
                sup_difference,
                convergence,
            })
        }
        Experiment::Rate { cases, control_segments, opt, limsup } => {
            let grid = Grid::uniform(*control_segments)?;
            let mut opt = opt.clone();
            opt.seed = seed;
            let mut out = Vec::with_capacity(cases.len());
            for case in cases {
                let result = minimize_rate(domain, coeffs, &case.x0, &case.target, &grid, &opt, exec)?;
                let limsup = match limsup {
                    Some(l) => Some(rate_with_initial_limsup(
                        domain,
                        coeffs,
                        &case.x0,
                        &case.target,
                        &l.radii,
                        l.samples_per_radius,
                        &grid,
                        &opt,
                        exec,
                    )?),
                    None => None,
                };
                out.push(RateCaseResult { x0: case.x0.clone(), target: case.target.clone(), result, limsup });
            }
            ExperimentResult::Rate { cases: out }
        }
        Experiment::LdpCurve { initial, event, epsilons, n_paths, level, prediction } => {
            let setup = prediction_setup(prediction, seed)?;
            ExperimentResult::LdpCurve(ldp_curve(
                domain,
                coeffs,
                initial,
                event,
                epsilons,
                *n_paths,
                *level,
                seed,
                setup.as_ref(),
                exec,
            )?)
        }
        Experiment::ExpApprox { x0, delta, levels, epsilon, n_paths } => ExperimentResult::ExpApprox(exp_approx_probe(
            domain, coeffs, x0, *delta, levels, *epsilon, *n_paths, seed, exec,
        )?),
        Experiment::Anticipated { law, event, epsilons, n_paths, level, prediction } => {
            let setup = prediction_setup(prediction, seed)?;
            ExperimentResult::Anticipated(anticipated_experiment(
                domain,
                coeffs,
                law,
                event,
                epsilons,
                *n_paths,
                *level,
                seed,
                setup.as_ref(),
                exec,
            )?)
        }
        Experiment::Uniform { points, event, epsilon, n_paths, level, prediction } => {
            let setup = prediction_setup(prediction, seed)?;
            ExperimentResult::Uniform(uniform_probe(
                domain,
                coeffs,
                points,
                event,
                *epsilon,
                *n_paths,
                *level,
                seed,
                setup.as_ref(),
                exec,
            )?)
        }
    })
}
