//! Discrete Skorohod problem: constrain a driving path to the closed domain
//! by closest-point projection after every free increment, and record the
//! pushing (local time) process.
//!
//! With `y_free = y_prev + increment`, one step returns
//! `y_next = project(y_free)` and `dk = y_free - y_next`. The increment `dk`
//! lies in the outward normal cone at `y_next` by the projection theorem, so
//! `y_next = y_prev + increment - dk` is the discrete form of
//! `Y = omega - k`, `dk = xi d|k|`, with `|k|` growing only on the boundary.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::linalg::norm;

/// Largest supported dyadic level (2^24 steps).
pub const MAX_LEVEL: u32 = 24;

/// Time grid on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRecord", into = "GridRecord")]
pub struct Grid {
    level: Option<u32>,
    times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GridRecord {
    Dyadic { level: u32 },
    Explicit { times: Vec<f64> },
}

impl TryFrom<GridRecord> for Grid {
    type Error = Error;
    fn try_from(r: GridRecord) -> Result<Self> {
        match r {
            GridRecord::Dyadic { level } => Grid::try_dyadic(level),
            GridRecord::Explicit { times } => Grid::from_times(times),
        }
    }
}

impl From<Grid> for GridRecord {
    fn from(g: Grid) -> Self {
        match g.level {
            Some(level) => GridRecord::Dyadic { level },
            None => GridRecord::Explicit { times: g.times },
        }
    }
}

impl Grid {
    /// Dyadic grid `t_k = k / 2^n`.
    ///
    /// Panics if `level > MAX_LEVEL`; use [`Grid::try_dyadic`] for input
    /// that is not known in advance.
    pub fn dyadic(level: u32) -> Self {
        Self::try_dyadic(level).expect("dyadic level out of range")
    }

    pub fn try_dyadic(level: u32) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::InvalidGrid(format!("level {level} exceeds {MAX_LEVEL}")));
        }
        let n = 1usize << level;
        let h = 1.0 / n as f64;
        let times = (0..=n).map(|k| k as f64 * h).collect();
        Ok(Self { level: Some(level), times })
    }

    /// Uniform grid with `segments` equal steps. Returns the dyadic grid when
    /// `segments` is a power of two.
    pub fn uniform(segments: usize) -> Result<Self> {
        if segments == 0 {
            return Err(Error::InvalidGrid("a grid needs at least one segment".into()));
        }
        if segments.is_power_of_two() {
            return Self::try_dyadic(segments.trailing_zeros());
        }
        let times = (0..=segments).map(|k| if k == segments { 1.0 } else { k as f64 / segments as f64 }).collect();
        Self::from_times(times)
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidGrid("a grid needs at least two times".into()));
        }
        if times[0] != 0.0 || *times.last().unwrap() != 1.0 {
            return Err(Error::InvalidGrid("grid must start at 0 and end at 1".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("grid times must be strictly increasing".into()));
        }
        Ok(Self { level: None, times })
    }

    pub fn level(&self) -> Option<u32> {
        self.level
    }
    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }
    #[inline]
    pub fn dt(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }
}

/// A point per grid time, stored flat (`values[k * dim + i]`). Between grid
/// times the path is taken to be piecewise linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub grid: Grid,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl Path {
    pub fn new(grid: Grid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != grid.len() * dim {
            return Err(Error::InvalidArgument(format!(
                "path of dimension {dim} on {} times needs {} values, got {}",
                grid.len(),
                grid.len() * dim,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("path values must be finite".into()));
        }
        Ok(Self { grid, dim, values })
    }

    /// Samples `f` at every grid time.
    pub fn from_fn(grid: Grid, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Result<Self> {
        let mut values = vec![0.0; grid.len() * dim];
        for (k, &t) in grid.times().iter().enumerate() {
            f(t, &mut values[k * dim..(k + 1) * dim]);
        }
        Self::new(grid, dim, values)
    }

    pub fn constant(grid: Grid, point: &[f64]) -> Self {
        let values = point.iter().copied().cycle().take(grid.len() * point.len()).collect();
        Self { grid, dim: point.len(), values }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }
    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    #[inline]
    pub fn point(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.point(self.len() - 1)
    }

    /// Piecewise-linear value at time `t` in `[0, 1]`.
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let times = self.grid.times();
        let k = match times.binary_search_by(|s| s.partial_cmp(&t).unwrap()) {
            Ok(k) => {
                out.copy_from_slice(self.point(k));
                return;
            }
            Err(0) => 0,
            Err(k) if k >= times.len() => times.len() - 2,
            Err(k) => k - 1,
        };
        let w = (t - times[k]) / (times[k + 1] - times[k]);
        let (a, b) = (self.point(k), self.point(k + 1));
        for i in 0..self.dim {
            out[i] = a[i] + w * (b[i] - a[i]);
        }
    }

    /// Uniform distance between the piecewise-linear representatives of two
    /// paths: the maximum over the union of both grids.
    pub fn sup_distance(&self, other: &Path) -> f64 {
        assert_eq!(self.dim, other.dim, "sup distance between paths of different dimension");
        let (ta, tb) = (self.grid.times(), other.grid.times());
        let mut a = vec![0.0; self.dim];
        let mut b = vec![0.0; self.dim];
        let (mut i, mut j) = (0, 0);
        let mut sup = 0.0f64;
        while i < ta.len() || j < tb.len() {
            let t = match (ta.get(i), tb.get(j)) {
                (Some(&x), Some(&y)) if x == y => {
                    i += 1;
                    j += 1;
                    x
                }
                (Some(&x), Some(&y)) if x < y => {
                    i += 1;
                    x
                }
                (Some(&x), None) => {
                    i += 1;
                    x
                }
                (_, Some(&y)) => {
                    j += 1;
                    y
                }
                (None, None) => unreachable!(),
            };
            self.eval(t, &mut a);
            other.eval(t, &mut b);
            sup = sup.max(crate::linalg::dist(&a, &b));
        }
        sup
    }
}

/// Output of the Skorohod map.
///
/// `local_time` holds per-step increments aligned with the grid
/// (`local_time[0..dim]` is zero, entry `k` is the push applied on the step
/// ending at `t_k`); `total_variation[k]` is the cumulative `|k|_{t_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectedPath {
    pub state: Path,
    pub local_time: Vec<f64>,
    pub total_variation: Vec<f64>,
}

impl ReflectedPath {
    /// Empty buffer sized for `grid`, for reuse in hot loops.
    pub fn zeros(grid: Grid, dim: usize) -> Self {
        let n = grid.len();
        Self {
            state: Path { grid, dim, values: vec![0.0; n * dim] },
            local_time: vec![0.0; n * dim],
            total_variation: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.state.dim
    }

    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    pub fn local_time_increment(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.local_time[k * d..(k + 1) * d]
    }

    /// Total pushing `|k|_1`.
    pub fn total_local_time(&self) -> f64 {
        *self.total_variation.last().unwrap_or(&0.0)
    }

    /// Prefix sums of the local-time increments, `k_{t_j}` flat.
    pub fn cumulative_local_time(&self) -> Vec<f64> {
        let d = self.dim();
        let mut acc = vec![0.0; d];
        let mut out = Vec::with_capacity(self.local_time.len());
        for inc in self.local_time.chunks_exact(d) {
            for (a, v) in acc.iter_mut().zip(inc) {
                *a += v;
            }
            out.extend_from_slice(&acc);
        }
        out
    }

    /// Checks containment, monotone total variation, `|dk| = d|k|`,
    /// boundary activation and normal-cone alignment of every push.
    pub fn check_invariants(&self, domain: &DomainSpec) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::InvalidArgument(msg));
        let d = self.dim();
        if d != domain.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), got: d });
        }
        if self.total_variation.first() != Some(&0.0) {
            return fail("total variation must start at 0".into());
        }
        for k in 0..self.len() {
            let x = self.state.point(k);
            if !domain.contains_unchecked(x) {
                return fail(format!("state at step {k} lies outside the closure"));
            }
            if k == 0 {
                continue;
            }
            let dk = self.local_time_increment(k);
            let dtv = self.total_variation[k] - self.total_variation[k - 1];
            if dtv < 0.0 {
                return fail(format!("total variation decreases at step {k}"));
            }
            if (norm(dk) - dtv).abs() > 1e-12 * (1.0 + self.total_variation[k]) {
                return fail(format!("|dk| != d|k| at step {k}"));
            }
            if norm(dk) > 0.0 {
                if !domain.on_boundary(x) {
                    return fail(format!("local time grows at interior step {k}"));
                }
                let cos = domain.normal_cone_alignment(x, dk)?;
                if cos < 1.0 - 1e-9 {
                    return fail(format!("push at step {k} leaves the normal cone (cos {cos})"));
                }
            }
        }
        Ok(())
    }
}

/// One reflected step. Returns `(y_next, dk)`.
pub fn skorohod_step(domain: &DomainSpec, y_prev: &[f64], increment: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    domain.check_dim(y_prev)?;
    domain.check_dim(increment)?;
    if !domain.contains_unchecked(y_prev) {
        return Err(Error::OutsideClosure);
    }
    let mut y_next = vec![0.0; y_prev.len()];
    let mut dk = vec![0.0; y_prev.len()];
    step_into(domain, y_prev, increment, &mut y_next, &mut dk)?;
    Ok((y_next, dk))
}

/// Allocation-free step; `y_prev` is trusted to lie in the closure. Returns
/// `|dk|`.
#[inline]
pub fn step_into(
    domain: &DomainSpec,
    y_prev: &[f64],
    increment: &[f64],
    y_next: &mut [f64],
    dk: &mut [f64],
) -> Result<f64> {
    for i in 0..y_prev.len() {
        dk[i] = y_prev[i] + increment[i];
    }
    if domain.contains_unchecked(dk) {
        y_next.copy_from_slice(dk);
        dk.fill(0.0);
        return Ok(0.0);
    }
    domain.project_into(dk, y_next)?;
    let mut s = 0.0;
    for i in 0..dk.len() {
        dk[i] -= y_next[i];
        s += dk[i] * dk[i];
    }
    Ok(libm::sqrt(s))
}

/// Reflects the whole driver. Increments are `omega(t_{k+1}) - omega(t_k)`.
pub fn solve_skorohod(domain: &DomainSpec, driver: &Path) -> Result<ReflectedPath> {
    let d = driver.dim;
    domain.check_dim(driver.point(0))?;
    if !domain.contains_unchecked(driver.point(0)) {
        return Err(Error::OutsideClosure);
    }
    let mut out = ReflectedPath::zeros(driver.grid.clone(), d);
    out.state.values[..d].copy_from_slice(driver.point(0));
    let mut inc = vec![0.0; d];
    for k in 1..driver.len() {
        let (prev, cur) = (driver.point(k - 1), driver.point(k));
        for i in 0..d {
            inc[i] = cur[i] - prev[i];
        }
        let (head, tail) = out.state.values.split_at_mut(k * d);
        let mag =
            step_into(domain, &head[(k - 1) * d..], &inc, &mut tail[..d], &mut out.local_time[k * d..(k + 1) * d])?;
        out.total_variation[k] = out.total_variation[k - 1] + mag;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_grid_is_exact() {
        let g = Grid::dyadic(10);
        assert_eq!(g.len(), 1025);
        assert_eq!(g.times()[0], 0.0);
        assert_eq!(*g.times().last().unwrap(), 1.0);
        for k in 0..g.steps() {
            assert_eq!(g.dt(k), 1.0 / 1024.0);
        }
        assert!(Grid::from_times(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Grid::from_times(vec![0.1, 1.0]).is_err());
        assert!(Grid::try_dyadic(MAX_LEVEL + 1).is_err());
        assert_eq!(Grid::uniform(16).unwrap(), Grid::dyadic(4));
        assert_eq!(Grid::uniform(3).unwrap().steps(), 3);
    }

    #[test]
    fn step_examples() {
        let iv = DomainSpec::interval(0.0, 2.0).unwrap();
        assert_eq!(skorohod_step(&iv, &[0.5], &[0.3]).unwrap(), (vec![0.8], vec![0.0]));
        let (y, dk) = skorohod_step(&iv, &[0.2], &[-0.5]).unwrap();
        assert_eq!(y, vec![0.0]);
        assert!((dk[0] + 0.3).abs() < 1e-15);
        let ball = DomainSpec::ball(&[0.0, 0.0], 1.0).unwrap();
        let (y, dk) = skorohod_step(&ball, &[0.9, 0.0], &[0.3, 0.0]).unwrap();
        assert_eq!(y, vec![1.0, 0.0]);
        assert!((dk[0] - 0.2).abs() < 1e-15 && dk[1] == 0.0);
        assert_eq!(skorohod_step(&iv, &[3.0], &[0.1]), Err(Error::OutsideClosure));
    }

    #[test]
    fn interval_one_sided_reflection() {
        let iv = DomainSpec::interval(0.0, 2.0).unwrap();
        let driver = Path::from_fn(Grid::dyadic(8), 1, |t, x| x[0] = 0.5 - t).unwrap();
        let r = solve_skorohod(&iv, &driver).unwrap();
        for (k, &t) in r.state.grid.times().iter().enumerate() {
            assert!((r.state.point(k)[0] - (0.5 - t).max(0.0)).abs() < 1e-12);
        }
        assert!((r.total_local_time() - 0.5).abs() < 1e-12);
        r.check_invariants(&iv).unwrap();
    }

    #[test]
    fn ball_radial_reflection() {
        let ball = DomainSpec::ball(&[0.0, 0.0], 1.0).unwrap();
        let driver = Path::from_fn(Grid::dyadic(8), 2, |t, x| {
            x[0] = 2.0 * t;
            x[1] = 0.0;
        })
        .unwrap();
        let r = solve_skorohod(&ball, &driver).unwrap();
        for (k, &t) in r.state.grid.times().iter().enumerate() {
            assert!((r.state.point(k)[0] - (2.0 * t).min(1.0)).abs() < 1e-12);
        }
        assert!((r.total_local_time() - 1.0).abs() < 1e-12);
        r.check_invariants(&ball).unwrap();
    }

    #[test]
    fn interior_constant_driver_never_pushes() {
        let bx = DomainSpec::axis_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let driver = Path::constant(Grid::dyadic(5), &[0.3, 0.6]);
        let r = solve_skorohod(&bx, &driver).unwrap();
        assert_eq!(r.state, driver);
        assert!(r.local_time.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn initial_point_outside_is_rejected() {
        let iv = DomainSpec::interval(0.0, 1.0).unwrap();
        let driver = Path::constant(Grid::dyadic(2), &[1.5]);
        assert_eq!(solve_skorohod(&iv, &driver), Err(Error::OutsideClosure));
    }

    #[test]
    fn sup_distance_uses_piecewise_linear_interpolation() {
        let a = Path::from_fn(Grid::dyadic(1), 1, |t, x| x[0] = if t == 0.5 { 1.0 } else { 0.0 }).unwrap();
        let b = Path::constant(Grid::dyadic(0), &[0.0]);
        assert_eq!(a.sup_distance(&b), 1.0);
        let c = Path::from_fn(Grid::dyadic(0), 1, |t, x| x[0] = t).unwrap();
        let e = Path::from_fn(Grid::dyadic(3), 1, |t, x| x[0] = t).unwrap();
        assert!(c.sup_distance(&e) < 1e-15);
    }
}
