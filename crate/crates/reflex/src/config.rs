//! Experiment configuration files (TOML).
//!
//! ```toml
//! version = 1
//! seed = 7
//!
//! [domain]
//! shape = "interval"
//! lo = -2.0
//! hi = 2.0
//!
//! [coefficients]
//! preset = "zero-drift-identity"
//!
//! [experiment]
//! kind = "ldp-curve"
//! epsilons = [0.5, 0.25, 0.125]
//! n_paths = 200000
//! event = { kind = "sup-exceeds", c = 1.0 }
//! initial = { kind = "deterministic", x0 = [0.0] }
//! ```

use std::path::{Path, PathBuf};

use reflex_core::coeffs::CoefficientPreset;
use reflex_core::ldp::EventSpec;
use reflex_core::rate::{OptConfig, TargetSpec};
use reflex_core::sde::InitialLaw;
use reflex_core::{DomainSpec, Shape};
use serde::{Deserialize, Serialize};

use crate::error::RunError;

pub const CONFIG_VERSION: u32 = 1;
/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "REFLEX_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "reflex-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    pub domain: DomainConfig,
    pub coefficients: CoefficientPreset,
    pub experiment: Experiment,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_tolerance: Option<f64>,
}

impl DomainConfig {
    pub fn build(&self) -> reflex_core::Result<DomainSpec> {
        DomainSpec::with_constants(self.shape.clone(), self.c0, self.alpha, self.boundary_tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Write every simulated path as its own CSV (simulate only).
    pub path_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, path_csv: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkeletonMethod {
    Picard,
    Euler,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictionConfig {
    pub enabled: bool,
    pub control_segments: usize,
    pub opt: OptConfig,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        Self { enabled: true, control_segments: 16, opt: OptConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCase {
    pub x0: Vec<f64>,
    pub target: TargetSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimsupConfig {
    pub radii: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples_per_radius: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Simulate {
        x0: Vec<f64>,
        epsilon: f64,
        level: u32,
        #[serde(default)]
        first_path: u64,
        #[serde(default = "one")]
        n_paths: u64,
    },
    Skeleton {
        x0: Vec<f64>,
        /// One value per segment of a uniform grid on `[0, 1]`.
        control: Vec<Vec<f64>>,
        #[serde(default)]
        method: SkeletonMethod,
        #[serde(default = "default_skeleton_level")]
        level: u32,
        /// Increasing Euler levels whose successive sup differences are reported.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        convergence_levels: Vec<u32>,
    },
    Rate {
        cases: Vec<RateCase>,
        #[serde(default = "default_segments")]
        control_segments: usize,
        #[serde(default)]
        opt: OptConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limsup: Option<LimsupConfig>,
    },
    LdpCurve {
        initial: InitialLaw,
        event: EventSpec,
        epsilons: Vec<f64>,
        n_paths: u64,
        #[serde(default = "default_mc_level")]
        level: u32,
        #[serde(default)]
        prediction: PredictionConfig,
    },
    ExpApprox {
        x0: Vec<f64>,
        delta: f64,
        levels: Vec<u32>,
        epsilon: f64,
        n_paths: u64,
    },
    Anticipated {
        law: InitialLaw,
        event: EventSpec,
        epsilons: Vec<f64>,
        n_paths: u64,
        #[serde(default = "default_mc_level")]
        level: u32,
        #[serde(default)]
        prediction: PredictionConfig,
    },
    Uniform {
        points: Vec<Vec<f64>>,
        event: EventSpec,
        epsilon: f64,
        n_paths: u64,
        #[serde(default = "default_mc_level")]
        level: u32,
        #[serde(default)]
        prediction: PredictionConfig,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Simulate { .. } => "simulate",
            Experiment::Skeleton { .. } => "skeleton",
            Experiment::Rate { .. } => "rate",
            Experiment::LdpCurve { .. } => "ldp-curve",
            Experiment::ExpApprox { .. } => "exp-approx",
            Experiment::Anticipated { .. } => "anticipated",
            Experiment::Uniform { .. } => "uniform",
        }
    }
}

fn one() -> u64 {
    1
}

fn default_samples() -> usize {
    16
}

fn default_segments() -> usize {
    16
}

fn default_skeleton_level() -> u32 {
    12
}

fn default_mc_level() -> u32 {
    10
}

impl ExperimentConfig {
    /// Parses a config, rejecting unknown keys anywhere in the document.
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        let raw: toml::Table =
            text.parse().map_err(|e: toml::de::Error| RunError::Schema { pointer: None, message: e.to_string() })?;
        let raw = toml::Value::Table(raw);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(raw.clone()).map_err(|e| {
            let pointer = pointer_from_path(&e.path().to_string());
            RunError::Schema { pointer, message: e.into_inner().to_string() }
        })?;
        let typed =
            toml::Value::try_from(&cfg).map_err(|e| RunError::Schema { pointer: None, message: e.to_string() })?;
        if let Some(pointer) = first_unknown(&raw, &typed, String::new()) {
            return Err(RunError::Schema { message: format!("unknown field `{pointer}`"), pointer: Some(pointer) });
        }
        if cfg.version != CONFIG_VERSION {
            return Err(RunError::Schema {
                pointer: Some("/version".into()),
                message: format!("unsupported config version {} (expected {CONFIG_VERSION})", cfg.version),
            });
        }
        Ok(cfg)
    }

    /// Output directory: the explicit flag, then the config, then
    /// `REFLEX_OUT_DIR`, then `reflex-out`.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output.dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize to TOML")
    }
}

fn pointer_from_path(path: &str) -> Option<String> {
    if path.is_empty() || path == "." {
        return None;
    }
    let mut out = String::new();
    for seg in path.split('.') {
        // serde_path_to_error renders sequence indices as `name[3]`
        let mut rest = seg;
        if let Some(i) = rest.find('[') {
            out.push('/');
            out.push_str(&rest[..i]);
            rest = &rest[i..];
            while let Some(end) = rest.find(']') {
                out.push('/');
                out.push_str(&rest[1..end]);
                rest = &rest[end + 1..];
            }
        } else {
            out.push('/');
            out.push_str(rest);
        }
    }
    Some(out)
}

/// JSON pointer of the first key present in `raw` but not in `typed`.
fn first_unknown(raw: &toml::Value, typed: &toml::Value, at: String) -> Option<String> {
    match (raw, typed) {
        (toml::Value::Table(r), toml::Value::Table(t)) => r.iter().find_map(|(k, v)| {
            let here = format!("{at}/{k}");
            match t.get(k) {
                None => Some(here),
                Some(tv) => first_unknown(v, tv, here),
            }
        }),
        (toml::Value::Array(r), toml::Value::Array(t)) => {
            r.iter().zip(t).enumerate().find_map(|(i, (rv, tv))| first_unknown(rv, tv, format!("{at}/{i}")))
        }
        _ => None,
    }
}
