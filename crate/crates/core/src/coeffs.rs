//! Drift and diffusion coefficients.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::linalg::{dist, frobenius, norm};
use crate::rng::{Stream, StreamTag};

/// Drift `b` and diffusion matrix `sigma` (row-major, `d x d`).
pub trait Coefficients: Sync {
    fn dim(&self) -> usize;
    fn drift(&self, x: &[f64], out: &mut [f64]);
    fn diffusion(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DriftSpec {
    Zero,
    /// `b(x) = theta (x - anchor)`
    Linear {
        theta: f64,
        anchor: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DiffusionSpec {
    /// `sigma(x) = scale I`
    Identity { scale: f64 },
    /// `sigma(x) = scale R(kappa x_0)`: rotation by angle `kappa x_0` in the
    /// plane of the first two coordinates, identity on the rest.
    Rotation { kappa: f64, scale: f64 },
}

/// Named presets as they appear in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientPreset {
    ZeroDriftIdentity {
        #[serde(default = "one")]
        scale: f64,
    },
    LinearDrift {
        theta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        anchor: Option<Vec<f64>>,
    },
    RotationSigma {
        #[serde(default = "one")]
        kappa: f64,
        #[serde(default)]
        theta: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl CoefficientPreset {
    pub fn name(&self) -> &'static str {
        match self {
            CoefficientPreset::ZeroDriftIdentity { .. } => "zero-drift-identity",
            CoefficientPreset::LinearDrift { .. } => "linear-drift",
            CoefficientPreset::RotationSigma { .. } => "rotation-sigma",
        }
    }
}

/// A coefficient pair with its declared common Lipschitz and sup bounds on
/// the bounding box of a domain. Matrix norms are Frobenius.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    pub dim: usize,
    pub lip_bound: f64,
    pub sup_bound: f64,
    pub preset_name: String,
}

impl CoefficientField {
    pub fn zero_drift_identity(dim: usize) -> Self {
        Self {
            drift: DriftSpec::Zero,
            diffusion: DiffusionSpec::Identity { scale: 1.0 },
            dim,
            lip_bound: 0.0,
            sup_bound: libm::sqrt(dim as f64),
            preset_name: "zero-drift-identity".into(),
        }
    }

    pub fn from_preset(preset: &CoefficientPreset, domain: &DomainSpec) -> Result<Self> {
        let dim = domain.dim();
        let (drift, diffusion) = match preset {
            CoefficientPreset::ZeroDriftIdentity { scale } => {
                (DriftSpec::Zero, DiffusionSpec::Identity { scale: *scale })
            }
            CoefficientPreset::LinearDrift { theta, anchor } => {
                let anchor = anchor.clone().unwrap_or_else(|| domain.center());
                domain.check_dim(&anchor)?;
                (DriftSpec::Linear { theta: *theta, anchor }, DiffusionSpec::Identity { scale: 1.0 })
            }
            CoefficientPreset::RotationSigma { kappa, theta } => {
                if dim < 2 {
                    return Err(Error::InvalidArgument("rotation-sigma needs dimension >= 2".into()));
                }
                let drift = if *theta == 0.0 {
                    DriftSpec::Zero
                } else {
                    DriftSpec::Linear { theta: *theta, anchor: domain.center() }
                };
                (drift, DiffusionSpec::Rotation { kappa: *kappa, scale: 1.0 })
            }
        };
        let mut field = Self::new(drift, diffusion, domain)?;
        field.preset_name = preset.name().into();
        Ok(field)
    }

    /// Computes the declared bounds analytically over the bounding box of
    /// `domain`.
    pub fn new(drift: DriftSpec, diffusion: DiffusionSpec, domain: &DomainSpec) -> Result<Self> {
        let dim = domain.dim();
        let drift_ok = match &drift {
            DriftSpec::Zero => true,
            DriftSpec::Linear { theta, anchor } => theta.is_finite() && anchor.iter().all(|a| a.is_finite()),
        };
        let diffusion_ok = match &diffusion {
            DiffusionSpec::Identity { scale } => scale.is_finite(),
            DiffusionSpec::Rotation { kappa, scale } => kappa.is_finite() && scale.is_finite(),
        };
        let params_finite = drift_ok && diffusion_ok;
        if !params_finite {
            return Err(Error::InvalidArgument("coefficient parameters must be finite".into()));
        }
        let (lo, hi) = domain.bounding_box();
        let (drift_lip, drift_sup) = match &drift {
            DriftSpec::Zero => (0.0, 0.0),
            DriftSpec::Linear { theta, anchor } => {
                domain.check_dim(anchor)?;
                let far: f64 = lo
                    .iter()
                    .zip(&hi)
                    .zip(anchor)
                    .map(|((l, h), a)| libm::pow((l - a).abs().max((h - a).abs()), 2.0))
                    .sum();
                (theta.abs(), theta.abs() * libm::sqrt(far))
            }
        };
        let (diff_lip, diff_sup) = match &diffusion {
            DiffusionSpec::Identity { scale } => (0.0, scale.abs() * libm::sqrt(dim as f64)),
            DiffusionSpec::Rotation { kappa, scale } => {
                if dim < 2 {
                    return Err(Error::InvalidArgument("rotation diffusion needs dimension >= 2".into()));
                }
                (core::f64::consts::SQRT_2 * kappa.abs() * scale.abs(), scale.abs() * libm::sqrt(dim as f64))
            }
        };
        Ok(Self {
            drift,
            diffusion,
            dim,
            lip_bound: drift_lip.max(diff_lip),
            sup_bound: drift_sup.max(diff_sup),
            preset_name: String::from("custom"),
        })
    }

    /// Checks the declared bounds on random pairs from the bounding box of
    /// `domain`, with slack `1e-9`.
    pub fn spot_check(&self, domain: &DomainSpec, n_pairs: usize, seed: u64) -> SpotCheckReport {
        let d = self.dim;
        let (lo, hi) = domain.bounding_box();
        let mut rng = Stream::new(seed, StreamTag::Sampling, 0x5107);
        let draw =
            |rng: &mut Stream| -> Vec<f64> { lo.iter().zip(&hi).map(|(l, h)| l + (h - l) * rng.uniform()).collect() };
        let (mut bx, mut by) = (vec![0.0; d], vec![0.0; d]);
        let (mut sx, mut sy) = (vec![0.0; d * d], vec![0.0; d * d]);
        let mut worst_lip = 0.0f64;
        let mut worst_sup = 0.0f64;
        for _ in 0..n_pairs {
            let x = draw(&mut rng);
            let y = draw(&mut rng);
            self.drift(&x, &mut bx);
            self.drift(&y, &mut by);
            self.diffusion(&x, &mut sx);
            self.diffusion(&y, &mut sy);
            let dxy = dist(&x, &y);
            if dxy > 0.0 {
                let sdiff: Vec<f64> = sx.iter().zip(&sy).map(|(a, b)| a - b).collect();
                worst_lip = worst_lip.max(dist(&bx, &by) / dxy).max(frobenius(&sdiff) / dxy);
            }
            worst_sup = worst_sup.max(norm(&bx)).max(frobenius(&sx));
        }
        SpotCheckReport {
            n_pairs,
            worst_lipschitz_ratio: worst_lip,
            worst_sup,
            lipschitz_ok: worst_lip <= self.lip_bound + 1e-9,
            sup_ok: worst_sup <= self.sup_bound + 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotCheckReport {
    pub n_pairs: usize,
    pub worst_lipschitz_ratio: f64,
    pub worst_sup: f64,
    pub lipschitz_ok: bool,
    pub sup_ok: bool,
}

impl SpotCheckReport {
    pub fn passed(&self) -> bool {
        self.lipschitz_ok && self.sup_ok
    }
}

impl Coefficients for CoefficientField {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        match &self.drift {
            DriftSpec::Zero => out.fill(0.0),
            DriftSpec::Linear { theta, anchor } => {
                for ((o, xi), a) in out.iter_mut().zip(x).zip(anchor) {
                    *o = theta * (xi - a);
                }
            }
        }
    }

    #[inline]
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.fill(0.0);
        match &self.diffusion {
            DiffusionSpec::Identity { scale } => {
                for i in 0..d {
                    out[i * d + i] = *scale;
                }
            }
            DiffusionSpec::Rotation { kappa, scale } => {
                let (s, c) = libm::sincos(kappa * x[0]);
                out[0] = scale * c;
                out[1] = -scale * s;
                out[d] = scale * s;
                out[d + 1] = scale * c;
                for i in 2..d {
                    out[i * d + i] = *scale;
                }
            }
        }
    }
}

impl core::fmt::Display for CoefficientField {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&format!("{} (lip {:.3e}, sup {:.3e})", self.preset_name, self.lip_bound, self.sup_bound))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_pass_spot_check() {
        let ball = DomainSpec::ball(&[0.0, 0.0], 1.0).unwrap();
        let bx = DomainSpec::axis_box(&[-1.0, 0.0, 2.0], &[1.0, 0.5, 3.0]).unwrap();
        for preset in [
            CoefficientPreset::ZeroDriftIdentity { scale: 1.0 },
            CoefficientPreset::LinearDrift { theta: -1.5, anchor: None },
            CoefficientPreset::RotationSigma { kappa: 2.0, theta: 0.5 },
        ] {
            for dom in [&ball, &bx] {
                let c = CoefficientField::from_preset(&preset, dom).unwrap();
                let r = c.spot_check(dom, 1000, 1);
                assert!(r.passed(), "{preset:?}: {r:?}");
            }
        }
    }

    #[test]
    fn rotation_needs_two_dimensions() {
        let iv = DomainSpec::interval(0.0, 1.0).unwrap();
        assert!(
            CoefficientField::from_preset(&CoefficientPreset::RotationSigma { kappa: 1.0, theta: 0.0 }, &iv).is_err()
        );
    }

    #[test]
    fn rotation_is_orthogonal() {
        let ball = DomainSpec::ball(&[0.0, 0.0, 0.0], 1.0).unwrap();
        let c =
            CoefficientField::from_preset(&CoefficientPreset::RotationSigma { kappa: 1.3, theta: 0.0 }, &ball).unwrap();
        let mut s = [0.0; 9];
        c.diffusion(&[0.4, -0.2, 0.1], &mut s);
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| s[k * 3 + i] * s[k * 3 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn understated_bound_is_caught() {
        let ball = DomainSpec::ball(&[0.0, 0.0], 1.0).unwrap();
        let mut c =
            CoefficientField::from_preset(&CoefficientPreset::LinearDrift { theta: 2.0, anchor: None }, &ball).unwrap();
        c.lip_bound = 1.0;
        assert!(!c.spot_check(&ball, 200, 2).lipschitz_ok);
    }
}
