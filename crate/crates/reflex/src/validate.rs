//! Static checks on a parsed config: domain admissibility, coefficient
//! bounds and experiment parameters. Nothing is simulated.

use reflex_core::coeffs::SpotCheckReport;
use reflex_core::geometry::AdmissibilityReport;
use reflex_core::ldp::EventSpec;
use reflex_core::sde::{InitialLaw, ScaleRule, REFERENCE_LEVEL};
use reflex_core::skorohod::MAX_LEVEL;
use reflex_core::{CoefficientField, DomainSpec, Error};
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig, CONFIG_VERSION};

pub const ADMISSIBILITY_SAMPLES: usize = 2000;
pub const SPOT_CHECK_PAIRS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    /// JSON pointer into the config.
    pub pointer: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
    pub admissibility: Option<AdmissibilityReport>,
    pub spot_check: Option<SpotCheckReport>,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        match self.issues.first() {
            None => "ok".into(),
            Some(i) if self.issues.len() == 1 => format!("{}: {}", i.pointer, i.message),
            Some(i) => format!("{}: {} (and {} more)", i.pointer, i.message, self.issues.len() - 1),
        }
    }
}

struct Checker<'a> {
    domain: &'a DomainSpec,
    issues: Vec<Issue>,
}

impl Checker<'_> {
    fn issue(&mut self, pointer: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue { pointer: pointer.into(), message: message.into() });
    }

    fn point(&mut self, pointer: &str, x: &[f64]) {
        if x.len() != self.domain.dim() {
            self.issue(pointer, format!("expected a point of dimension {}, got {}", self.domain.dim(), x.len()));
        } else if !x.iter().all(|v| v.is_finite()) {
            self.issue(pointer, "coordinates must be finite");
        } else if !self.domain.contains_unchecked(x) {
            self.issue(pointer, "point lies outside the closed domain");
        }
    }

    fn epsilon(&mut self, pointer: &str, eps: f64) {
        if !(eps.is_finite() && eps > 0.0) {
            self.issue(pointer, format!("epsilon must be positive, got {eps}"));
        }
    }

    fn epsilons(&mut self, pointer: &str, eps: &[f64]) {
        if eps.is_empty() {
            self.issue(pointer, "at least one epsilon is required");
        }
        for (i, e) in eps.iter().enumerate() {
            self.epsilon(&format!("{pointer}/{i}"), *e);
        }
        if eps.windows(2).any(|w| w[1] >= w[0]) {
            self.issue(pointer, "epsilons must be strictly decreasing");
        }
    }

    fn level(&mut self, pointer: &str, level: u32, max: u32) {
        if level > max {
            self.issue(pointer, format!("level {level} exceeds the maximum {max}"));
        }
    }

    fn positive_count(&mut self, pointer: &str, n: u64) {
        if n == 0 {
            self.issue(pointer, "must be at least 1");
        }
    }

    fn law(&mut self, pointer: &str, law: &InitialLaw) {
        let x0_ptr = format!("{pointer}/x0");
        self.point(&x0_ptr, law.x0());
        if let Err(e) = law.check_concentration() {
            let at = match (law, &e) {
                (InitialLaw::Shifted { scale: ScaleRule::SqrtEpsilon, .. }, Error::InitialLawNotConcentrated(_)) => {
                    format!("{pointer}/scale")
                }
                _ => format!("{pointer}/variate"),
            };
            self.issue(at, e.to_string());
        }
    }

    fn event(&mut self, pointer: &str, event: &EventSpec) {
        if let Err(e) = event.validate(self.domain) {
            self.issue(pointer, e.to_string());
        }
    }
}

/// Runs every static check; a report with `ok = false` lists each problem
/// with a pointer to the offending field.
pub fn validate(cfg: &ExperimentConfig) -> ValidationReport {
    let mut issues = Vec::new();
    if cfg.version != CONFIG_VERSION {
        issues.push(Issue { pointer: "/version".into(), message: format!("unsupported version {}", cfg.version) });
    }
    let domain = match cfg.domain.build() {
        Ok(d) => d,
        Err(e) => {
            issues.push(Issue { pointer: "/domain".into(), message: e.to_string() });
            return ValidationReport { ok: false, issues, admissibility: None, spot_check: None };
        }
    };
    let admissibility = domain.check_admissibility(ADMISSIBILITY_SAMPLES, cfg.seed);
    if !admissibility.passed() {
        issues.push(Issue { pointer: "/domain".into(), message: "domain admissibility check failed".into() });
    }
    let spot_check = match CoefficientField::from_preset(&cfg.coefficients, &domain) {
        Ok(c) => {
            let r = c.spot_check(&domain, SPOT_CHECK_PAIRS, cfg.seed);
            if !r.passed() {
                issues.push(Issue {
                    pointer: "/coefficients".into(),
                    message: "declared Lipschitz or sup bound exceeded".into(),
                });
            }
            Some(r)
        }
        Err(e) => {
            issues.push(Issue { pointer: "/coefficients".into(), message: e.to_string() });
            None
        }
    };
    let mut ck = Checker { domain: &domain, issues };
    check_experiment(&mut ck, &cfg.experiment);
    let issues = ck.issues;
    ValidationReport { ok: issues.is_empty(), issues, admissibility: Some(admissibility), spot_check }
}

fn check_experiment(ck: &mut Checker<'_>, exp: &Experiment) {
    let p = "/experiment";
    match exp {
        Experiment::Simulate { x0, epsilon, level, n_paths, .. } => {
            ck.point(&format!("{p}/x0"), x0);
            ck.epsilon(&format!("{p}/epsilon"), *epsilon);
            ck.level(&format!("{p}/level"), *level, MAX_LEVEL);
            ck.positive_count(&format!("{p}/n_paths"), *n_paths);
        }
        Experiment::Skeleton { x0, control, level, convergence_levels, .. } => {
            ck.point(&format!("{p}/x0"), x0);
            if control.is_empty() {
                ck.issue(format!("{p}/control"), "control needs at least one segment");
            }
            for (k, v) in control.iter().enumerate() {
                if v.len() != ck.domain.dim() || !v.iter().all(|x| x.is_finite()) {
                    ck.issue(format!("{p}/control/{k}"), format!("expected {} finite values", ck.domain.dim()));
                }
            }
            ck.level(&format!("{p}/level"), *level, MAX_LEVEL);
            for (i, l) in convergence_levels.iter().enumerate() {
                ck.level(&format!("{p}/convergence_levels/{i}"), *l, MAX_LEVEL);
            }
            if convergence_levels.windows(2).any(|w| w[1] <= w[0]) {
                ck.issue(format!("{p}/convergence_levels"), "levels must be strictly increasing");
            }
        }
        Experiment::Rate { cases, control_segments, opt, limsup } => {
            if cases.is_empty() {
                ck.issue(format!("{p}/cases"), "at least one case is required");
            }
            for (i, c) in cases.iter().enumerate() {
                ck.point(&format!("{p}/cases/{i}/x0"), &c.x0);
                if let Err(e) = c.target.validate(ck.domain) {
                    ck.issue(format!("{p}/cases/{i}/target"), e.to_string());
                }
            }
            if *control_segments == 0 {
                ck.issue(format!("{p}/control_segments"), "must be at least 1");
            }
            if opt.restarts == 0 {
                ck.issue(format!("{p}/opt/restarts"), "must be at least 1");
            }
            if opt.penalty_schedule.is_empty() || opt.penalty_schedule.iter().any(|m| !(*m > 0.0)) {
                ck.issue(format!("{p}/opt/penalty_schedule"), "needs positive penalty weights");
            }
            ck.level(&format!("{p}/opt/solver_level"), opt.solver_level, MAX_LEVEL);
            if let Some(l) = limsup {
                if l.radii.is_empty() || l.radii.windows(2).any(|w| w[1] >= w[0]) || l.radii.iter().any(|r| !(*r > 0.0))
                {
                    ck.issue(format!("{p}/limsup/radii"), "radii must be positive and strictly decreasing");
                }
            }
        }
        Experiment::LdpCurve { initial, event, epsilons, n_paths, level, .. } => {
            ck.law(&format!("{p}/initial"), initial);
            ck.event(&format!("{p}/event"), event);
            ck.epsilons(&format!("{p}/epsilons"), epsilons);
            ck.positive_count(&format!("{p}/n_paths"), *n_paths);
            ck.level(&format!("{p}/level"), *level, MAX_LEVEL);
        }
        Experiment::ExpApprox { x0, delta, levels, epsilon, n_paths } => {
            ck.point(&format!("{p}/x0"), x0);
            if !(delta.is_finite() && *delta > 0.0) {
                ck.issue(format!("{p}/delta"), "delta must be positive");
            }
            if levels.is_empty() {
                ck.issue(format!("{p}/levels"), "at least one level is required");
            }
            for (i, l) in levels.iter().enumerate() {
                ck.level(&format!("{p}/levels/{i}"), *l, REFERENCE_LEVEL);
            }
            ck.epsilon(&format!("{p}/epsilon"), *epsilon);
            ck.positive_count(&format!("{p}/n_paths"), *n_paths);
        }
        Experiment::Anticipated { law, event, epsilons, n_paths, level, .. } => {
            ck.law(&format!("{p}/law"), law);
            ck.event(&format!("{p}/event"), event);
            ck.epsilons(&format!("{p}/epsilons"), epsilons);
            ck.positive_count(&format!("{p}/n_paths"), *n_paths);
            ck.level(&format!("{p}/level"), *level, MAX_LEVEL);
        }
        Experiment::Uniform { points, event, epsilon, n_paths, level, .. } => {
            if points.is_empty() {
                ck.issue(format!("{p}/points"), "at least one point is required");
            }
            for (i, x) in points.iter().enumerate() {
                ck.point(&format!("{p}/points/{i}"), x);
            }
            ck.event(&format!("{p}/event"), event);
            ck.epsilon(&format!("{p}/epsilon"), *epsilon);
            ck.positive_count(&format!("{p}/n_paths"), *n_paths);
            ck.level(&format!("{p}/level"), *level, MAX_LEVEL);
        }
    }
}
