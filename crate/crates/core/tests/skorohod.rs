mod common;

use common::{presets, random_driver, stream};
use proptest::prelude::*;
use reflex_core::skorohod::solve_skorohod;
use reflex_core::{DomainSpec, Grid, Path};

/// Closed-form reflection at the lower endpoint `lo` for a piecewise-linear
/// driver that never pushes against the upper one.
fn one_sided(lo: f64, omega: &[f64]) -> (Vec<f64>, f64) {
    let mut push: f64 = 0.0;
    let y = omega
        .iter()
        .map(|w| {
            push = push.max(lo - w);
            w + push
        })
        .collect();
    (y, push)
}

#[test]
fn one_dimensional_oracle_twenty_drivers() {
    let iv = DomainSpec::interval(-2.0, 2.0).unwrap();
    let mut done = 0;
    let mut index = 0;
    while done < 20 {
        index += 1;
        let mut rng = stream(index);
        let level = 6 + (index % 5) as u32;
        let x0 = -1.5 + rng.uniform();
        let drift = -3.0 * rng.uniform();
        let mut w = random_driver(&[x0], level, 1.0, &mut rng);
        for (k, v) in w.values.iter_mut().enumerate() {
            *v += drift * w.grid.times()[k];
        }
        let (y, push) = one_sided(-2.0, &w.values);
        if push == 0.0 || y.iter().any(|v| *v > 2.0) {
            continue;
        }
        let r = solve_skorohod(&iv, &w).unwrap();
        for (a, b) in r.state.values.iter().zip(&y) {
            assert!((a - b).abs() <= 1e-8, "driver {index}: {a} vs {b}");
        }
        assert!((r.total_local_time() - push).abs() <= 1e-8);
        r.check_invariants(&iv).unwrap();
        done += 1;
    }
}

#[test]
fn local_time_stable_under_refinement() {
    let ball = DomainSpec::ball(&[0.0, 0.0], 1.0).unwrap();
    let driver = |level: u32| {
        Path::from_fn(Grid::dyadic(level), 2, |t, out| {
            out[0] = 1.4 * (5.0 * t).sin() + 0.3 * t;
            out[1] = 0.9 * (7.0 * t).cos() - 0.5;
        })
        .unwrap()
    };
    let totals: Vec<f64> = (8..=12).map(|l| solve_skorohod(&ball, &driver(l)).unwrap().total_local_time()).collect();
    assert!(totals[0] > 0.5);
    for w in totals.windows(2) {
        assert!((w[1] - w[0]).abs() < 0.1 * w[0], "{totals:?}");
    }
}

#[test]
fn stability_envelope() {
    // fit C in |Y1 - Y2| <= C (δ + √δ) on half the pairs, check the rest
    // against 2C
    for (name, domain) in presets() {
        let d = domain.dim();
        let x0 = domain.center();
        let mut ratios = Vec::new();
        for p in 0..40u64 {
            let mut rng = stream(1000 + p);
            let w1 = random_driver(&x0, 8, 1.5, &mut rng);
            let delta = 10f64.powi(-1 - (p % 5) as i32);
            let mut w2 = w1.clone();
            for v in w2.values.iter_mut().skip(d) {
                *v += delta * (2.0 * rng.uniform() - 1.0);
            }
            let dist = w1.sup_distance(&w2);
            let y1 = solve_skorohod(&domain, &w1).unwrap();
            let y2 = solve_skorohod(&domain, &w2).unwrap();
            ratios.push(y1.state.sup_distance(&y2.state) / (dist + dist.sqrt()));
        }
        let c = ratios[..20].iter().cloned().fold(0.0, f64::max);
        for r in &ratios[20..] {
            assert!(*r <= 2.0 * c + 1e-12, "{name}: {r} vs fitted {c}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflected_paths_satisfy_invariants(index in 0u64..1_000_000, preset in 0usize..4, scale in 0.5f64..4.0) {
        let (_, domain) = presets().swap_remove(preset);
        let mut rng = stream(index);
        let w = random_driver(&domain.center(), 7, scale, &mut rng);
        let r = solve_skorohod(&domain, &w).unwrap();
        prop_assert!(r.check_invariants(&domain).is_ok(), "{:?}", r.check_invariants(&domain));
    }

    #[test]
    fn interior_driver_is_untouched(index in 0u64..1_000_000, preset in 0usize..4) {
        let (_, domain) = presets().swap_remove(preset);
        let mut rng = stream(index);
        let w = random_driver(&domain.center(), 6, 0.01, &mut rng);
        let r = solve_skorohod(&domain, &w).unwrap();
        prop_assert!(r.state.sup_distance(&w) <= 1e-12);
        prop_assert_eq!(r.total_local_time(), 0.0);
    }
}
