//! The controlled skeleton equation
//!
//! ```text
//! z(t) = x + ∫_0^t b(z) ds + ∫_0^t σ(z) ψ ds - k(t)
//! ```
//!
//! with `k` the local time keeping `z` in the closed domain, solved two
//! independent ways: Picard iteration of the map "freeze the path, integrate,
//! reflect", and the dyadic Euler scheme with coefficients frozen at the left
//! grid point of each step.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::coeffs::Coefficients;
use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::linalg::{mat_vec, sup_dist};
use crate::skorohod::{solve_skorohod, step_into, Grid, Path, ReflectedPath};

/// Piecewise-constant control: `values[k * dim..]` is the value on
/// `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub grid: Grid,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl Control {
    pub fn new(grid: Grid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != grid.steps() * dim {
            return Err(Error::InvalidArgument(format!(
                "control of dimension {dim} on {} segments needs {} values, got {}",
                grid.steps(),
                grid.steps() * dim,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("control values must be finite".into()));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zero(grid: Grid, dim: usize) -> Self {
        let n = grid.steps() * dim;
        Self { grid, dim, values: vec![0.0; n] }
    }

    pub fn constant(grid: Grid, value: &[f64]) -> Self {
        let n = grid.steps();
        let values = value.iter().copied().cycle().take(n * value.len()).collect();
        Self { grid, dim: value.len(), values }
    }

    pub fn segments(&self) -> usize {
        self.grid.steps()
    }

    #[inline]
    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// `∫_0^1 |ψ|^2 ds`
    pub fn l2_norm_sq(&self) -> f64 {
        (0..self.segments()).map(|k| self.value(k).iter().map(|v| v * v).sum::<f64>() * self.grid.dt(k)).sum()
    }

    /// The action `1/2 ∫ |ψ|^2`.
    pub fn action(&self) -> f64 {
        0.5 * self.l2_norm_sq()
    }

    /// Exact averages of this control over the intervals of `target`. When
    /// `target` refines this control's grid the values are copied, so the
    /// action is unchanged.
    pub fn resample(&self, target: &Grid) -> Control {
        if *target == self.grid {
            return self.clone();
        }
        let d = self.dim;
        let src = self.grid.times();
        let dst = target.times();
        let mut values = vec![0.0; target.steps() * d];
        let mut k = 0;
        for j in 0..target.steps() {
            let (a, b) = (dst[j], dst[j + 1]);
            while k + 1 < src.len() - 1 && src[k + 1] <= a {
                k += 1;
            }
            let out = &mut values[j * d..(j + 1) * d];
            let mut m = k;
            let mut covered_all = false;
            while m < src.len() - 1 && src[m] < b {
                let lo = src[m].max(a);
                let hi = src[m + 1].min(b);
                if hi > lo {
                    if lo == a && hi == b {
                        out.copy_from_slice(self.value(m));
                        covered_all = true;
                        break;
                    }
                    for (o, v) in out.iter_mut().zip(self.value(m)) {
                        *o += v * (hi - lo);
                    }
                }
                m += 1;
            }
            if !covered_all {
                for o in out.iter_mut() {
                    *o /= b - a;
                }
            }
        }
        Control { grid: target.clone(), dim: d, values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Picard,
    Euler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonSolution {
    pub z: ReflectedPath,
    pub control: Control,
    pub method: Method,
    /// Picard iterations used, or the dyadic level of the Euler grid.
    pub iterations_or_level: usize,
    /// Final sup-norm fixed-point residual (Picard only).
    pub residual: Option<f64>,
    /// Residual after each Picard iteration.
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl PicardOptions {
    /// `tol = 1e-10 * diam`, 200 iterations.
    pub fn for_domain(domain: &DomainSpec) -> Self {
        Self { tol: 1e-10 * domain.diameter(), max_iter: 200 }
    }
}

fn check_start(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    x0: &[f64],
    control: &Control,
) -> Result<()> {
    domain.check_dim(x0)?;
    if coeffs.dim() != domain.dim() || control.dim != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: control.dim.min(coeffs.dim()) });
    }
    if !domain.contains_unchecked(x0) {
        return Err(Error::OutsideClosure);
    }
    Ok(())
}

/// Picard iteration `Y_{m+1} = F(Y_m)` from `Y_0 ≡ x0` on `grid`.
///
/// `F` integrates `b(Y) + σ(Y) ψ` along the frozen path with the trapezoidal
/// rule (ψ is constant on each step after resampling onto `grid`) and
/// reflects the resulting driver.
pub fn picard_solve(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    x0: &[f64],
    control: &Control,
    grid: &Grid,
    opts: PicardOptions,
) -> Result<SkeletonSolution> {
    check_start(domain, coeffs, x0, control)?;
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidArgument("Picard needs tol > 0 and max_iter >= 1".into()));
    }
    let d = domain.dim();
    let psi = control.resample(grid);
    let mut current = Path::constant(grid.clone(), x0);
    let mut driver = current.clone();
    let mut b0 = vec![0.0; d];
    let mut b1 = vec![0.0; d];
    let mut s0 = vec![0.0; d * d];
    let mut s1 = vec![0.0; d * d];
    let mut sp0 = vec![0.0; d];
    let mut sp1 = vec![0.0; d];
    let mut history = Vec::new();
    for iter in 1..=opts.max_iter {
        driver.values[..d].copy_from_slice(x0);
        coeffs.drift(current.point(0), &mut b0);
        coeffs.diffusion(current.point(0), &mut s0);
        for k in 0..grid.steps() {
            let dt = grid.dt(k);
            let y1 = current.point(k + 1);
            coeffs.drift(y1, &mut b1);
            coeffs.diffusion(y1, &mut s1);
            mat_vec(&s0, psi.value(k), &mut sp0);
            mat_vec(&s1, psi.value(k), &mut sp1);
            for i in 0..d {
                let prev = driver.values[k * d + i];
                driver.values[(k + 1) * d + i] = prev + 0.5 * dt * (b0[i] + sp0[i] + b1[i] + sp1[i]);
            }
            core::mem::swap(&mut b0, &mut b1);
            core::mem::swap(&mut s0, &mut s1);
        }
        let next = solve_skorohod(domain, &driver)?;
        let residual = sup_dist(&next.state.values, &current.values, d);
        history.push(residual);
        if residual <= opts.tol {
            return Ok(SkeletonSolution {
                z: next,
                control: control.clone(),
                method: Method::Picard,
                iterations_or_level: iter,
                residual: Some(residual),
                residual_history: history,
            });
        }
        current = next.state;
    }
    Err(Error::PicardNotConverged { iterations: opts.max_iter, residual: *history.last().unwrap() })
}

/// Euler scheme on the dyadic grid of `level`:
/// `z_{k+1} = reflect(z_k + b(z_k) Δt + σ(z_k) ∫_{t_k}^{t_{k+1}} ψ ds)`.
pub fn euler_skeleton(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    x0: &[f64],
    control: &Control,
    level: u32,
) -> Result<SkeletonSolution> {
    check_start(domain, coeffs, x0, control)?;
    let grid = Grid::try_dyadic(level)?;
    let psi = control.resample(&grid);
    let z = euler_path(domain, coeffs, x0, &psi)?;
    Ok(SkeletonSolution {
        z,
        control: control.clone(),
        method: Method::Euler,
        iterations_or_level: level as usize,
        residual: None,
        residual_history: Vec::new(),
    })
}

/// Euler scheme on the grid of an already resampled control.
pub(crate) fn euler_path(
    domain: &DomainSpec,
    coeffs: &(impl Coefficients + ?Sized),
    x0: &[f64],
    psi: &Control,
) -> Result<ReflectedPath> {
    let d = domain.dim();
    let grid = &psi.grid;
    let mut out = ReflectedPath::zeros(grid.clone(), d);
    out.state.values[..d].copy_from_slice(x0);
    let mut b = vec![0.0; d];
    let mut s = vec![0.0; d * d];
    let mut sp = vec![0.0; d];
    let mut inc = vec![0.0; d];
    for k in 0..grid.steps() {
        let dt = grid.dt(k);
        let (head, tail) = out.state.values.split_at_mut((k + 1) * d);
        let z = &head[k * d..];
        coeffs.drift(z, &mut b);
        coeffs.diffusion(z, &mut s);
        mat_vec(&s, psi.value(k), &mut sp);
        for i in 0..d {
            inc[i] = (b[i] + sp[i]) * dt;
        }
        let mag = step_into(domain, z, &inc, &mut tail[..d], &mut out.local_time[(k + 1) * d..(k + 2) * d])?;
        out.total_variation[k + 1] = out.total_variation[k] + mag;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::CoefficientField;

    #[test]
    fn action_examples() {
        let g = Grid::dyadic(3);
        assert_eq!(Control::zero(g.clone(), 2).action(), 0.0);
        assert_eq!(Control::constant(g.clone(), &[1.0]).action(), 0.5);
        assert_eq!(Control::constant(g, &[1.0, 1.0]).action(), 1.0);
    }

    #[test]
    fn resample_preserves_action_under_refinement() {
        let c = Control::new(Grid::dyadic(2), 1, vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let fine = c.resample(&Grid::dyadic(6));
        assert_eq!(fine.action(), c.action());
        let back = fine.resample(&Grid::dyadic(2));
        assert_eq!(back, c);
        // averaging onto a coarser grid
        let coarse = c.resample(&Grid::dyadic(1));
        assert_eq!(coarse.values, vec![-0.5, 1.75]);
        // non-nested grid
        let odd = c.resample(&Grid::uniform(3).unwrap());
        let integral: f64 = (0..3).map(|k| odd.values[k] * odd.grid.dt(k)).sum();
        assert!((integral - (1.0 - 2.0 + 0.5 + 3.0) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn zero_control_stays_put() {
        let ball = DomainSpec::ball(&[0.0, 0.0], 1.0).unwrap();
        let c = CoefficientField::zero_drift_identity(2);
        let psi = Control::zero(Grid::dyadic(3), 2);
        let p = picard_solve(&ball, &c, &[0.2, 0.1], &psi, &Grid::dyadic(6), PicardOptions::for_domain(&ball)).unwrap();
        assert_eq!(p.iterations_or_level, 1);
        assert!(p.z.state.values.chunks(2).all(|x| x == [0.2, 0.1]));
        assert!(p.z.local_time.iter().all(|v| *v == 0.0));
        for level in [0, 3, 9] {
            let e = euler_skeleton(&ball, &c, &[0.2, 0.1], &psi, level).unwrap();
            assert!(e.z.state.values.chunks(2).all(|x| x == [0.2, 0.1]));
        }
    }

    #[test]
    fn free_motion_in_large_ball() {
        let ball = DomainSpec::ball(&[0.0, 0.0], 10.0).unwrap();
        let c = CoefficientField::zero_drift_identity(2);
        let v = [0.3, -0.2];
        let psi = Control::constant(Grid::dyadic(4), &v);
        let grid = Grid::dyadic(8);
        let p = picard_solve(&ball, &c, &[0.0, 0.0], &psi, &grid, PicardOptions::for_domain(&ball)).unwrap();
        for (k, &t) in grid.times().iter().enumerate() {
            let z = p.z.state.point(k);
            assert!((z[0] - v[0] * t).abs() < 1e-8 && (z[1] - v[1] * t).abs() < 1e-8);
        }
    }

    #[test]
    fn interval_reflection_closed_form() {
        let iv = DomainSpec::interval(0.0, 1.0).unwrap();
        let c = CoefficientField::zero_drift_identity(1);
        let psi = Control::constant(Grid::dyadic(0), &[-2.0]);
        let grid = Grid::dyadic(10);
        let p = picard_solve(&iv, &c, &[0.5], &psi, &grid, PicardOptions::for_domain(&iv)).unwrap();
        for (k, &t) in grid.times().iter().enumerate() {
            assert!((p.z.state.point(k)[0] - (0.5 - 2.0 * t).max(0.0)).abs() < 1e-12);
        }
        assert!((p.z.total_local_time() - 1.5).abs() < 1e-12);
        let e = euler_skeleton(&iv, &c, &[0.5], &psi, 12).unwrap();
        for (k, &t) in e.z.state.grid.times().iter().enumerate() {
            assert!((e.z.state.point(k)[0] - (0.5 - 2.0 * t).max(0.0)).abs() < 5e-3);
        }
        e.z.check_invariants(&iv).unwrap();
    }

    #[test]
    fn start_outside_is_rejected() {
        let iv = DomainSpec::interval(0.0, 1.0).unwrap();
        let c = CoefficientField::zero_drift_identity(1);
        let psi = Control::zero(Grid::dyadic(1), 1);
        assert_eq!(euler_skeleton(&iv, &c, &[1.5], &psi, 3).unwrap_err(), Error::OutsideClosure);
        assert_eq!(
            picard_solve(&iv, &c, &[-0.1], &psi, &Grid::dyadic(3), PicardOptions::for_domain(&iv)).unwrap_err(),
            Error::OutsideClosure
        );
    }

    #[test]
    fn picard_reports_non_convergence() {
        let ball = DomainSpec::ball(&[0.0, 0.0], 1.0).unwrap();
        let c = CoefficientField::from_preset(
            &crate::coeffs::CoefficientPreset::RotationSigma { kappa: 2.0, theta: 1.0 },
            &ball,
        )
        .unwrap();
        let psi = Control::constant(Grid::dyadic(2), &[1.0, 0.5]);
        let err =
            picard_solve(&ball, &c, &[0.0, 0.0], &psi, &Grid::dyadic(6), PicardOptions { tol: 1e-14, max_iter: 2 })
                .unwrap_err();
        assert!(matches!(err, Error::PicardNotConverged { iterations: 2, residual } if residual > 0.0));
    }
}
