mod common;

use common::{nontrivial, presets};
use reflex_core::ldp::{estimate_probability, exp_approx_probe, ldp_curve, EventSpec, PredictionSetup};
use reflex_core::rate::OptConfig;
use reflex_core::sde::{InitialLaw, NoiseConfig};
use reflex_core::{CoefficientField, DomainSpec, Grid, Sequential};

fn interval() -> (DomainSpec, CoefficientField) {
    (DomainSpec::interval(-2.0, 2.0).unwrap(), CoefficientField::zero_drift_identity(1))
}

fn setup() -> PredictionSetup {
    PredictionSetup { control_grid: Grid::uniform(16).unwrap(), opt: OptConfig { restarts: 2, ..OptConfig::default() } }
}

#[test]
fn level_ten_agrees_with_level_thirteen() {
    let (iv, c) = interval();
    let law = InitialLaw::deterministic(&[0.0]);
    let ev = EventSpec::SupExceeds { c: 1.0 };
    let n = 200_000;
    let coarse =
        estimate_probability(&iv, &c, &law, &ev, &NoiseConfig::new(0.125, 10, 9, 0).unwrap(), n, &Sequential).unwrap();
    let fine =
        estimate_probability(&iv, &c, &law, &ev, &NoiseConfig::new(0.125, 13, 9, 0).unwrap(), n, &Sequential).unwrap();
    assert!((coarse.p_hat - fine.p_hat).abs() <= 3.0 * coarse.std_err, "{coarse:?} vs {fine:?}");
    // finer monitoring of the same coupled paths only adds crossings
    assert!(fine.hits >= coarse.hits);
}

#[test]
fn predictions_follow_the_distance_to_the_level() {
    let (iv, c) = interval();
    let ev = EventSpec::SupExceeds { c: 1.0 };
    for (x0, rate) in [(0.0, 0.5), (0.5, 0.125)] {
        let curve = ldp_curve(
            &iv,
            &c,
            &InitialLaw::deterministic(&[x0]),
            &ev,
            &[0.5, 0.25],
            4000,
            8,
            1,
            Some(&setup()),
            &Sequential,
        )
        .unwrap();
        let v = curve.prediction.unwrap().value.unwrap();
        let tol = 1e-3 * iv.diameter();
        // the level may be met up to the feasibility tolerance
        assert!(v <= rate + 1e-6 && v >= 0.5 * (1.0 - x0 - tol).powi(2), "x0 = {x0}: {v}");
        for e in &curve.estimates {
            assert_eq!(e.slope_err.unwrap(), e.epsilon * e.std_err / e.p_hat);
        }
    }
}

#[test]
fn curves_are_reproducible() {
    let (iv, c) = interval();
    let law = InitialLaw::deterministic(&[0.0]);
    let ev = EventSpec::SupExceeds { c: 1.0 };
    let run = || ldp_curve(&iv, &c, &law, &ev, &[0.5, 0.25], 3000, 7, 42, None, &Sequential).unwrap();
    assert_eq!(run(), run());
}

#[test]
fn approximation_error_decays_with_level_on_every_preset() {
    for (name, domain) in presets() {
        let c = nontrivial(&domain);
        let t = exp_approx_probe(&domain, &c, &domain.center(), 0.05, &[2, 4, 6, 8], 0.1, 200, 3, &Sequential).unwrap();
        for w in t.rows.windows(2) {
            assert!(w[1].p_hat <= w[0].p_hat, "{name}: {:?}", t.rows);
            assert!(w[1].mean_sup_diff < w[0].mean_sup_diff, "{name}: {:?}", t.rows);
        }
    }
}
