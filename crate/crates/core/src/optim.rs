//! Derivative-free minimization: Nelder–Mead with dimension-adaptive
//! coefficients and restarts.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// Stop when the simplex diameter (sup norm) falls below this.
    pub x_tol: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl NelderMeadOptions {
    pub fn for_dim(n: usize) -> Self {
        Self { max_evals: 400 * n + 2000, f_tol: 1e-12, x_tol: 1e-9, initial_step: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimizes `f` from `start`. Non-finite values are treated as `+inf`.
pub fn nelder_mead(mut f: impl FnMut(&[f64]) -> f64, start: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let value = eval(start, &mut evals);
        return Minimum { x: Vec::new(), value, evals, converged: true };
    }
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];
    let mut converged = false;

    while evals < opts.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let mut size: f64 = 0.0;
        for v in &simplex[1..] {
            for (a, b) in v.iter().zip(&simplex[0]) {
                size = size.max((a - b).abs());
            }
        }
        if size <= opts.x_tol || (spread.is_finite() && spread <= opts.f_tol * (1.0 + values[0].abs())) {
            converged = true;
            break;
        }

        centroid.fill(0.0);
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let along = |t: f64, out: &mut [f64], worst: &[f64], c: &[f64]| {
            for i in 0..out.len() {
                out[i] = c[i] + t * (c[i] - worst[i]);
            }
        };

        along(alpha, &mut trial, &simplex[n], &centroid);
        let fr = eval(&trial, &mut evals);
        if fr < values[0] {
            along(beta, &mut trial2, &simplex[n], &centroid);
            let fe = eval(&trial2, &mut evals);
            if fe < fr {
                simplex[n].copy_from_slice(&trial2);
                values[n] = fe;
            } else {
                simplex[n].copy_from_slice(&trial);
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n].copy_from_slice(&trial);
            values[n] = fr;
            continue;
        }
        let (t, reference) = if fr < values[n] { (gamma, fr) } else { (-gamma, values[n]) };
        along(t, &mut trial2, &simplex[n], &centroid);
        let fc = eval(&trial2, &mut evals);
        if fc < reference || (fc <= reference && fc.is_finite()) {
            simplex[n].copy_from_slice(&trial2);
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for j in 1..=n {
            for i in 0..n {
                simplex[j][i] = best[i] + delta * (simplex[j][i] - best[i]);
            }
            values[j] = eval(&simplex[j], &mut evals);
        }
    }

    let (mut bi, mut bv) = (0, values[0]);
    for (i, v) in values.iter().enumerate() {
        if *v < bv {
            bi = i;
            bv = *v;
        }
    }
    Minimum { x: simplex[bi].clone(), value: bv, evals, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let m = nelder_mead(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2) + 0.5 * (x[2] - 0.5).powi(2),
            &[0.0, 0.0, 0.0],
            &NelderMeadOptions::for_dim(3),
        );
        assert!(m.value < 1e-10, "{m:?}");
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] + 2.0).abs() < 1e-4);
    }

    #[test]
    fn rosenbrock() {
        let m = nelder_mead(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &[-1.2, 1.0],
            &NelderMeadOptions { max_evals: 5000, ..NelderMeadOptions::for_dim(2) },
        );
        assert!(m.value < 1e-8, "{m:?}");
    }

    #[test]
    fn infinite_region_is_avoided() {
        let m = nelder_mead(
            |x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.25).powi(2) },
            &[1.0],
            &NelderMeadOptions::for_dim(1),
        );
        assert!((m.x[0] - 0.25).abs() < 1e-4);
    }
}
