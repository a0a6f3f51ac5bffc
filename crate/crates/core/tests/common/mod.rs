#![allow(dead_code)]

use reflex_core::coeffs::CoefficientPreset;
use reflex_core::rng::{Stream, StreamTag};
use reflex_core::skeleton::Control;
use reflex_core::{CoefficientField, DomainSpec, Grid, Path};

pub fn presets() -> Vec<(&'static str, DomainSpec)> {
    vec![
        ("interval", DomainSpec::interval(-2.0, 2.0).unwrap()),
        ("ball", DomainSpec::ball(&[0.0, 0.0], 1.0).unwrap()),
        ("box", DomainSpec::axis_box(&[-1.0, -0.5], &[1.0, 0.5]).unwrap()),
        ("ellipsoid", DomainSpec::ellipsoid(&[0.2, 0.0], &[1.5, 0.75]).unwrap()),
    ]
}

pub fn rotation(domain: &DomainSpec) -> CoefficientField {
    CoefficientField::from_preset(&CoefficientPreset::RotationSigma { kappa: 1.0, theta: 0.5 }, domain).unwrap()
}

/// Rotation sigma in two or more dimensions, linear drift in one.
pub fn nontrivial(domain: &DomainSpec) -> CoefficientField {
    if domain.dim() >= 2 {
        rotation(domain)
    } else {
        CoefficientField::from_preset(&CoefficientPreset::LinearDrift { theta: 0.7, anchor: None }, domain).unwrap()
    }
}

pub fn stream(index: u64) -> Stream {
    Stream::new(2024, StreamTag::Sampling, index)
}

/// Random walk driver started at `x0` with step scale `scale`.
pub fn random_driver(x0: &[f64], level: u32, scale: f64, rng: &mut Stream) -> Path {
    let grid = Grid::dyadic(level);
    let d = x0.len();
    let mut values = x0.to_vec();
    let h = grid.dt(0).sqrt();
    for k in 0..grid.steps() {
        for i in 0..d {
            let prev = values[k * d + i];
            values.push(prev + scale * h * rng.normal());
        }
    }
    Path::new(grid, d, values).unwrap()
}

/// Random control on `segments` pieces rescaled to action exactly `action`.
pub fn random_control(d: usize, segments: usize, action: f64, rng: &mut Stream) -> Control {
    let grid = Grid::uniform(segments).unwrap();
    let values: Vec<f64> = (0..segments * d).map(|_| rng.normal()).collect();
    let c = Control::new(grid.clone(), d, values).unwrap();
    let s = (action / c.action()).sqrt();
    Control::new(grid, d, c.values.iter().map(|v| v * s).collect()).unwrap()
}
