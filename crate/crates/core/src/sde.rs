//! Reflected Euler–Maruyama simulation of
//! `dX = b(X) dt + sqrt(eps) σ(X) dB - dL` on dyadic grids.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::brownian::{fill_increments, BridgeBuffers};
use crate::coeffs::Coefficients;
use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::linalg::mat_vec;
use crate::rng::{CounterKey, StreamTag};
use crate::skorohod::{step_into, Grid, ReflectedPath, MAX_LEVEL};

/// Finest level used as the reference solution by the coupled probes.
pub const REFERENCE_LEVEL: u32 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub epsilon: f64,
    pub level: u32,
    pub seed: u64,
    pub path_index: u64,
}

impl NoiseConfig {
    pub fn new(epsilon: f64, level: u32, seed: u64, path_index: u64) -> Result<Self> {
        let n = Self { epsilon, level, seed, path_index };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.level > MAX_LEVEL {
            return Err(Error::InvalidArgument(format!("level {} exceeds {MAX_LEVEL}", self.level)));
        }
        Ok(())
    }

    pub fn with_path(self, path_index: u64) -> Self {
        Self { path_index, ..self }
    }
}

/// How the initial shift scales with the noise level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleRule {
    Epsilon,
    EpsilonSquared,
    /// Representable so configs using it can be diagnosed; never accepted.
    SqrtEpsilon,
}

impl ScaleRule {
    pub fn scale(self, epsilon: f64) -> f64 {
        match self {
            ScaleRule::Epsilon => epsilon,
            ScaleRule::EpsilonSquared => epsilon * epsilon,
            ScaleRule::SqrtEpsilon => libm::sqrt(epsilon),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Variate {
    Gaussian,
    /// Standard normal clamped componentwise to `[-bound, bound]`.
    ClampedGaussian {
        bound: f64,
    },
    /// Uniform on the cube `[-bound, bound]^d`.
    Uniform {
        bound: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialLaw {
    Deterministic {
        x0: Vec<f64>,
    },
    /// `X0 = project(x0 + s(eps) Z)`
    Shifted {
        x0: Vec<f64>,
        scale: ScaleRule,
        variate: Variate,
    },
}

impl InitialLaw {
    pub fn deterministic(x0: &[f64]) -> Self {
        InitialLaw::Deterministic { x0: x0.to_vec() }
    }

    pub fn shifted(x0: &[f64], scale: ScaleRule, variate: Variate) -> Result<Self> {
        let law = InitialLaw::Shifted { x0: x0.to_vec(), scale, variate };
        law.check_concentration()?;
        Ok(law)
    }

    pub fn x0(&self) -> &[f64] {
        match self {
            InitialLaw::Deterministic { x0 } | InitialLaw::Shifted { x0, .. } => x0,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, InitialLaw::Deterministic { .. })
    }

    /// The shift must satisfy `eps log P(|X0 - x0| > delta) -> -inf`. With
    /// `s(eps) = eps^p` and a Gaussian tail this exponent behaves like
    /// `-delta^2 eps^(1 - 2p) / 2`, which diverges only for `p > 1/2`; the
    /// `sqrt(eps)` rule sits exactly at the boundary and is refused.
    pub fn check_concentration(&self) -> Result<()> {
        if let InitialLaw::Shifted { scale, variate, .. } = self {
            if *scale == ScaleRule::SqrtEpsilon {
                return Err(Error::InitialLawNotConcentrated(
                    "s(eps) = sqrt(eps) gives eps log P(|X0 - x0| > delta) -> -delta^2/2 > -inf; \
                     use s(eps) = eps or eps^2"
                        .into(),
                ));
            }
            match variate {
                Variate::ClampedGaussian { bound } | Variate::Uniform { bound }
                    if !(bound.is_finite() && *bound > 0.0) =>
                {
                    return Err(Error::InvalidArgument("variate bound must be positive".into()));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn validate(&self, domain: &DomainSpec) -> Result<()> {
        domain.check_dim(self.x0())?;
        if !domain.contains_unchecked(self.x0()) {
            return Err(Error::OutsideClosure);
        }
        self.check_concentration()
    }
}

/// Draws `X0^eps` for path `path_index` from the initial-law substream, which
/// is disjoint from the Brownian substream of the same path.
pub fn sample_initial(
    law: &InitialLaw,
    domain: &DomainSpec,
    epsilon: f64,
    seed: u64,
    path_index: u64,
) -> Result<Vec<f64>> {
    law.validate(domain)?;
    Ok(sample_initial_unchecked(law, domain, epsilon, seed, path_index))
}

pub(crate) fn sample_initial_unchecked(
    law: &InitialLaw,
    domain: &DomainSpec,
    epsilon: f64,
    seed: u64,
    path_index: u64,
) -> Vec<f64> {
    match law {
        InitialLaw::Deterministic { x0 } => x0.clone(),
        InitialLaw::Shifted { x0, scale, variate } => {
            let key = CounterKey::new(seed, StreamTag::InitialLaw, path_index);
            let s = scale.scale(epsilon);
            let shifted: Vec<f64> = x0
                .iter()
                .enumerate()
                .map(|(i, xi)| {
                    let z = match variate {
                        Variate::Gaussian => key.normal(i as u64),
                        Variate::ClampedGaussian { bound } => key.normal(i as u64).clamp(-bound, *bound),
                        Variate::Uniform { bound } => {
                            let u = key.uniforms(i as u32)[0];
                            bound * (2.0 * u - 1.0)
                        }
                    };
                    xi + s * z
                })
                .collect();
            let mut out = vec![0.0; x0.len()];
            // presets always project
            domain.project_into(&shifted, &mut out).expect("projection of initial point");
            out
        }
    }
}

/// Scratch space for repeated simulation without allocation.
#[derive(Debug, Clone, Default)]
pub struct SimWorkspace {
    increments: Vec<f64>,
    bridge: BridgeBuffers,
    drift: Vec<f64>,
    sigma: Vec<f64>,
    noise: Vec<f64>,
    step: Vec<f64>,
}

impl SimWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Brownian increments of the last simulated path (step-major).
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }
}

fn check_start(domain: &DomainSpec, coeffs: &(impl Coefficients + ?Sized), x0: &[f64]) -> Result<()> {
    domain.check_dim(x0)?;
    if coeffs.dim() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: coeffs.dim() });
    }
    if !domain.contains_unchecked(x0) {
        return Err(Error::OutsideClosure);
    }
    Ok(())
}

pub fn simulate_reflected(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    x0: &[f64],
    noise: &NoiseConfig,
) -> Result<ReflectedPath> {
    noise.validate()?;
    let mut out = ReflectedPath::zeros(Grid::try_dyadic(noise.level)?, domain.dim());
    simulate_into(domain, coeffs, x0, noise, &mut SimWorkspace::new(), &mut out)?;
    Ok(out)
}

/// Simulates into a preallocated path whose grid must be the dyadic grid of
/// `noise.level`.
pub fn simulate_into(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    x0: &[f64],
    noise: &NoiseConfig,
    ws: &mut SimWorkspace,
    out: &mut ReflectedPath,
) -> Result<()> {
    check_start(domain, coeffs, x0)?;
    debug_assert_eq!(out.state.grid.level(), Some(noise.level));
    let mut incs = core::mem::take(&mut ws.increments);
    fill_increments(noise.seed, noise.path_index, noise.level, domain.dim(), &mut incs, &mut ws.bridge);
    let r = drive_with_increments(domain, coeffs, x0, noise.epsilon, &incs, ws, out);
    ws.increments = incs;
    r
}

/// The Euler scheme with caller-supplied Brownian increments (step-major,
/// one block of `dim` per step of `out`'s grid):
/// `X_{k+1} = reflect(X_k + b(X_k) Δt + sqrt(eps) σ(X_k) ΔB_k)`.
pub fn drive_with_increments(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    x0: &[f64],
    epsilon: f64,
    increments: &[f64],
    ws: &mut SimWorkspace,
    out: &mut ReflectedPath,
) -> Result<()> {
    let d = domain.dim();
    let steps = out.state.grid.steps();
    if increments.len() != steps * d {
        return Err(Error::InvalidArgument(format!("expected {} increments, got {}", steps * d, increments.len())));
    }
    ws.drift.resize(d, 0.0);
    ws.sigma.resize(d * d, 0.0);
    ws.noise.resize(d, 0.0);
    ws.step.resize(d, 0.0);
    let sqrt_eps = libm::sqrt(epsilon);
    out.state.values[..d].copy_from_slice(x0);
    out.local_time[..d].fill(0.0);
    out.total_variation[0] = 0.0;
    for k in 0..steps {
        let dt = out.state.grid.dt(k);
        let (head, tail) = out.state.values.split_at_mut((k + 1) * d);
        let x = &head[k * d..];
        coeffs.drift(x, &mut ws.drift);
        coeffs.diffusion(x, &mut ws.sigma);
        mat_vec(&ws.sigma, &increments[k * d..(k + 1) * d], &mut ws.noise);
        for i in 0..d {
            ws.step[i] = ws.drift[i] * dt + sqrt_eps * ws.noise[i];
        }
        let mag = step_into(domain, x, &ws.step, &mut tail[..d], &mut out.local_time[(k + 1) * d..(k + 2) * d])?;
        out.total_variation[k + 1] = out.total_variation[k] + mag;
    }
    Ok(())
}

/// Paths from several initial points driven by one Brownian path: the
/// discrete flow `x -> X^eps(x)` for the noise `(seed, path_index)`.
pub fn simulate_flow(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    initials: &[Vec<f64>],
    noise: &NoiseConfig,
) -> Result<Vec<ReflectedPath>> {
    noise.validate()?;
    for x in initials {
        check_start(domain, coeffs, x)?;
    }
    let d = domain.dim();
    let grid = Grid::try_dyadic(noise.level)?;
    let mut ws = SimWorkspace::new();
    let mut incs = Vec::new();
    fill_increments(noise.seed, noise.path_index, noise.level, d, &mut incs, &mut ws.bridge);
    initials
        .iter()
        .map(|x| {
            let mut out = ReflectedPath::zeros(grid.clone(), d);
            drive_with_increments(domain, coeffs, x, noise.epsilon, &incs, &mut ws, &mut out)?;
            Ok(out)
        })
        .collect()
}
