//! Bounded convex domains with exact closest-point projection and outward
//! normal cones.
//!
//! Four shapes are supported: interval, ball, axis-aligned box and
//! ellipsoid. All are convex, so the exterior-cone constant `c0` is zero and
//! projections are unique. The box has corners; its normal cone there is
//! generated by the outward unit normals of the active faces.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, dot, norm};
use crate::rng::{Stream, StreamTag};

pub const DEFAULT_BOUNDARY_TOLERANCE: f64 = 1e-9;
/// Threshold used by [`DomainSpec::check_admissibility`] for both inequalities.
pub const ADMISSIBILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Shape {
    Interval { lo: f64, hi: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    AxisBox { lo: Vec<f64>, hi: Vec<f64> },
    Ellipsoid { center: Vec<f64>, semi_axes: Vec<f64> },
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Interval { .. } => 1,
            Shape::Ball { center, .. } => center.len(),
            Shape::AxisBox { lo, .. } => lo.len(),
            Shape::Ellipsoid { center, .. } => center.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let bad = |msg: &str| Err(Error::InvalidDomain(msg.into()));
        match self {
            Shape::Interval { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                    return bad("interval needs finite lo < hi");
                }
            }
            Shape::Ball { center, radius } => {
                if center.is_empty() || !finite(center) {
                    return bad("ball center must be a nonempty finite point");
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad("ball radius must be positive");
                }
            }
            Shape::AxisBox { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() || !finite(lo) || !finite(hi) {
                    return bad("box corners must be finite points of equal dimension");
                }
                if lo.iter().zip(hi).any(|(l, h)| h <= l) {
                    return bad("box needs hi > lo componentwise");
                }
            }
            Shape::Ellipsoid { center, semi_axes } => {
                if center.is_empty() || center.len() != semi_axes.len() || !finite(center) {
                    return bad("ellipsoid center and semi-axes must match in dimension");
                }
                if semi_axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return bad("ellipsoid semi-axes must be positive");
                }
            }
        }
        Ok(())
    }
}

/// Smooth function whose gradient points into the domain on its boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `-1/2 * sum_i w_i (x_i - c_i)^2`
    Quadratic { center: Vec<f64>, weights: Vec<f64> },
    /// `prod_i cos(pi (x_i - m_i) / (2 w_i))` with `w_i` the box side lengths.
    CosineBump { mid: Vec<f64>, widths: Vec<f64> },
}

impl TestFunction {
    fn for_shape(shape: &Shape) -> Self {
        match shape {
            Shape::Interval { lo, hi } => TestFunction::Quadratic { center: vec![0.5 * (lo + hi)], weights: vec![1.0] },
            Shape::Ball { center, .. } => {
                TestFunction::Quadratic { center: center.clone(), weights: vec![1.0; center.len()] }
            }
            Shape::Ellipsoid { center, semi_axes } => TestFunction::Quadratic {
                center: center.clone(),
                weights: semi_axes.iter().map(|a| 1.0 / (a * a)).collect(),
            },
            Shape::AxisBox { lo, hi } => TestFunction::CosineBump {
                mid: lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
                widths: lo.iter().zip(hi).map(|(l, h)| h - l).collect(),
            },
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Quadratic { center, weights } => {
                -0.5 * x.iter().zip(center).zip(weights).map(|((xi, ci), wi)| wi * (xi - ci) * (xi - ci)).sum::<f64>()
            }
            TestFunction::CosineBump { mid, widths } => {
                x.iter().zip(mid).zip(widths).map(|((xi, mi), wi)| libm::cos(PI * (xi - mi) / (2.0 * wi))).product()
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            TestFunction::Quadratic { center, weights } => {
                x.iter().zip(center).zip(weights).map(|((xi, ci), wi)| -wi * (xi - ci)).collect()
            }
            TestFunction::CosineBump { mid, widths } => {
                let (cos, dcos) = cosine_factors(x, mid, widths);
                (0..x.len())
                    .map(|i| {
                        let others: f64 = cos.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, c)| c).product();
                        dcos[i] * others
                    })
                    .collect()
            }
        }
    }

    /// Row-major `d x d` Hessian.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut h = vec![0.0; d * d];
        match self {
            TestFunction::Quadratic { weights, .. } => {
                for i in 0..d {
                    h[i * d + i] = -weights[i];
                }
            }
            TestFunction::CosineBump { mid, widths } => {
                let (cos, dcos) = cosine_factors(x, mid, widths);
                for i in 0..d {
                    for j in 0..d {
                        let mut p = 1.0;
                        for (k, c) in cos.iter().enumerate() {
                            p *= if k == i && k == j {
                                let s = PI / (2.0 * widths[k]);
                                -s * s * c
                            } else if k == i || k == j {
                                dcos[k]
                            } else {
                                *c
                            };
                        }
                        h[i * d + j] = p;
                    }
                }
            }
        }
        h
    }
}

fn cosine_factors(x: &[f64], mid: &[f64], widths: &[f64]) -> (Vec<f64>, Vec<f64>) {
    x.iter()
        .zip(mid)
        .zip(widths)
        .map(|((xi, mi), wi)| {
            let s = PI / (2.0 * wi);
            let (sn, cs) = libm::sincos(s * (xi - mi));
            (cs, -s * sn)
        })
        .unzip()
}

/// A validated domain together with its admissibility constants.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    shape: Shape,
    dim: usize,
    c0: f64,
    alpha: f64,
    boundary_tolerance: f64,
    phi: TestFunction,
}

impl DomainSpec {
    pub fn new(shape: Shape) -> Result<Self> {
        Self::with_constants(shape, None, None, None)
    }

    /// Builds a domain, overriding the preset constants where given.
    ///
    /// `c0` must be zero: every shape here is convex. A negative value can
    /// never satisfy the exterior-cone inequality and is rejected as such.
    pub fn with_constants(
        shape: Shape,
        c0: Option<f64>,
        alpha: Option<f64>,
        boundary_tolerance: Option<f64>,
    ) -> Result<Self> {
        shape.validate()?;
        let c0 = c0.unwrap_or(0.0);
        if !c0.is_finite() || c0 < 0.0 {
            return Err(Error::InvalidDomain(format!("exterior-cone constant c0 must be >= 0, got {c0}")));
        }
        if c0 != 0.0 {
            return Err(Error::InvalidDomain(format!("convex presets declare c0 = 0, got {c0}")));
        }
        let dim = shape.dim();
        let alpha = alpha.unwrap_or(match &shape {
            Shape::Interval { .. } => 1.0,
            Shape::Ball { .. } | Shape::Ellipsoid { .. } => 0.5,
            Shape::AxisBox { .. } => 1.0 / libm::sqrt(dim as f64),
        });
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidDomain(format!("alpha must be positive, got {alpha}")));
        }
        let boundary_tolerance = boundary_tolerance.unwrap_or(DEFAULT_BOUNDARY_TOLERANCE);
        if !(boundary_tolerance.is_finite() && boundary_tolerance > 0.0) {
            return Err(Error::InvalidDomain("boundary tolerance must be positive".into()));
        }
        let phi = TestFunction::for_shape(&shape);
        Ok(Self { shape, dim, c0, alpha, boundary_tolerance, phi })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(Shape::Interval { lo, hi })
    }

    pub fn ball(center: &[f64], radius: f64) -> Result<Self> {
        Self::new(Shape::Ball { center: center.to_vec(), radius })
    }

    pub fn axis_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        Self::new(Shape::AxisBox { lo: lo.to_vec(), hi: hi.to_vec() })
    }

    pub fn ellipsoid(center: &[f64], semi_axes: &[f64]) -> Result<Self> {
        Self::new(Shape::Ellipsoid { center: center.to_vec(), semi_axes: semi_axes.to_vec() })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn c0(&self) -> f64 {
        self.c0
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn boundary_tolerance(&self) -> f64 {
        self.boundary_tolerance
    }
    pub fn phi(&self) -> &TestFunction {
        &self.phi
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    pub fn center(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Interval { lo, hi } => vec![0.5 * (lo + hi)],
            Shape::Ball { center, .. } | Shape::Ellipsoid { center, .. } => center.clone(),
            Shape::AxisBox { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.shape {
            Shape::Interval { lo, hi } => (vec![*lo], vec![*hi]),
            Shape::Ball { center, radius } => {
                (center.iter().map(|c| c - radius).collect(), center.iter().map(|c| c + radius).collect())
            }
            Shape::AxisBox { lo, hi } => (lo.clone(), hi.clone()),
            Shape::Ellipsoid { center, semi_axes } => (
                center.iter().zip(semi_axes).map(|(c, a)| c - a).collect(),
                center.iter().zip(semi_axes).map(|(c, a)| c + a).collect(),
            ),
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Interval { lo, hi } => hi - lo,
            Shape::Ball { radius, .. } => 2.0 * radius,
            Shape::AxisBox { lo, hi } => dist(lo, hi),
            Shape::Ellipsoid { semi_axes, .. } => 2.0 * semi_axes.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Largest Euclidean norm of a point of the closure.
    pub fn max_norm(&self) -> f64 {
        match &self.shape {
            Shape::Interval { lo, hi } => lo.abs().max(hi.abs()),
            Shape::Ball { center, radius } => norm(center) + radius,
            Shape::AxisBox { lo, hi } => {
                libm::sqrt(lo.iter().zip(hi).map(|(l, h)| libm::pow(l.abs().max(h.abs()), 2.0)).sum::<f64>())
            }
            Shape::Ellipsoid { center, semi_axes } => norm(center) + semi_axes.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Exact membership test for the closure; no dimension check.
    #[inline]
    pub fn contains_unchecked(&self, x: &[f64]) -> bool {
        match &self.shape {
            Shape::Interval { lo, hi } => *lo <= x[0] && x[0] <= *hi,
            Shape::Ball { center, radius } => {
                let mut s = 0.0;
                for (xi, ci) in x.iter().zip(center) {
                    s += (xi - ci) * (xi - ci);
                }
                s <= radius * radius
            }
            Shape::AxisBox { lo, hi } => x.iter().zip(lo).zip(hi).all(|((xi, l), h)| *l <= *xi && *xi <= *h),
            Shape::Ellipsoid { center, semi_axes } => {
                let mut s = 0.0;
                for ((xi, ci), ai) in x.iter().zip(center).zip(semi_axes) {
                    let u = (xi - ci) / ai;
                    s += u * u;
                }
                s <= 1.0
            }
        }
    }

    pub fn contains_closure(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x)?;
        Ok(self.contains_unchecked(x))
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.dim];
        self.project_into(x, &mut out)?;
        Ok(out)
    }

    /// Closest point of the closure, written to `out`. Points already in the
    /// closure are copied unchanged. The result always passes
    /// [`Self::contains_unchecked`].
    pub fn project_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(x);
        if self.contains_unchecked(x) {
            return Ok(());
        }
        match &self.shape {
            Shape::Interval { lo, hi } => out[0] = x[0].clamp(*lo, *hi),
            Shape::AxisBox { lo, hi } => {
                for ((o, l), h) in out.iter_mut().zip(lo).zip(hi) {
                    *o = o.clamp(*l, *h);
                }
            }
            Shape::Ball { center, radius } => {
                let mut r = 0.0;
                for (xi, ci) in x.iter().zip(center) {
                    r += (xi - ci) * (xi - ci);
                }
                let scale = radius / libm::sqrt(r);
                for ((o, xi), ci) in out.iter_mut().zip(x).zip(center) {
                    *o = ci + (xi - ci) * scale;
                }
                self.pull_inside(out, center);
            }
            Shape::Ellipsoid { center, semi_axes } => {
                let t = ellipsoid_multiplier(x, center, semi_axes)?;
                for (i, o) in out.iter_mut().enumerate() {
                    let a2 = semi_axes[i] * semi_axes[i];
                    *o = center[i] + a2 * (x[i] - center[i]) / (a2 + t);
                }
                self.pull_inside(out, center);
            }
        }
        Ok(())
    }

    /// Shrinks a point that sits on the boundary up to rounding toward
    /// `center` until the exact membership test accepts it.
    fn pull_inside(&self, y: &mut [f64], center: &[f64]) {
        let mut shrink = f64::EPSILON;
        while !self.contains_unchecked(y) {
            for (yi, ci) in y.iter_mut().zip(center) {
                *yi = ci + (*yi - ci) * (1.0 - shrink);
            }
            shrink *= 2.0;
        }
    }

    /// Signed distance-like gap to the boundary: positive outside (exact
    /// Euclidean distance to the closure), negative inside. Inside an
    /// ellipsoid the first-order estimate `g / |grad g|` is used, which is
    /// exact to leading order near the boundary.
    pub fn boundary_gap(&self, x: &[f64]) -> f64 {
        match &self.shape {
            Shape::Interval { lo, hi } => (lo - x[0]).max(x[0] - hi),
            Shape::Ball { center, radius } => dist(x, center) - radius,
            Shape::AxisBox { lo, hi } => {
                if self.contains_unchecked(x) {
                    x.iter().zip(lo).zip(hi).map(|((xi, l), h)| (l - xi).max(xi - h)).fold(f64::NEG_INFINITY, f64::max)
                } else {
                    let mut s = 0.0;
                    for ((xi, l), h) in x.iter().zip(lo).zip(hi) {
                        let c = xi.clamp(*l, *h);
                        s += (xi - c) * (xi - c);
                    }
                    libm::sqrt(s)
                }
            }
            Shape::Ellipsoid { center, semi_axes } => {
                if self.contains_unchecked(x) {
                    let mut g = -1.0;
                    let mut grad_sq = 0.0;
                    for ((xi, ci), ai) in x.iter().zip(center).zip(semi_axes) {
                        let u = xi - ci;
                        g += u * u / (ai * ai);
                        let gi = 2.0 * u / (ai * ai);
                        grad_sq += gi * gi;
                    }
                    let min_axis = semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
                    if grad_sq == 0.0 {
                        -min_axis
                    } else {
                        (g / libm::sqrt(grad_sq)).max(-min_axis)
                    }
                } else {
                    match self.project(x) {
                        Ok(p) => dist(x, &p),
                        Err(_) => f64::INFINITY,
                    }
                }
            }
        }
    }

    pub fn on_boundary(&self, x: &[f64]) -> bool {
        self.boundary_gap(x).abs() <= self.boundary_tolerance
    }

    /// Outward unit normals at a boundary point: one vector on smooth parts,
    /// the generators of the normal cone at box edges and corners.
    pub fn outward_normals(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(x)?;
        let gap = self.boundary_gap(x);
        if gap.abs() > self.boundary_tolerance {
            return Err(Error::NotOnBoundary { gap });
        }
        let tol = self.boundary_tolerance;
        Ok(match &self.shape {
            Shape::Interval { lo, hi } => {
                if (x[0] - lo).abs() <= (x[0] - hi).abs() {
                    vec![vec![-1.0]]
                } else {
                    vec![vec![1.0]]
                }
            }
            Shape::Ball { center, .. } => {
                let mut n: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                normalize(&mut n);
                vec![n]
            }
            Shape::Ellipsoid { center, semi_axes } => {
                let mut n: Vec<f64> =
                    x.iter().zip(center).zip(semi_axes).map(|((a, c), s)| (a - c) / (s * s)).collect();
                normalize(&mut n);
                vec![n]
            }
            Shape::AxisBox { lo, hi } => {
                let mut gens = Vec::new();
                for i in 0..self.dim {
                    let mut e = vec![0.0; self.dim];
                    if (x[i] - lo[i]).abs() <= tol {
                        e[i] = -1.0;
                        gens.push(e);
                    } else if (x[i] - hi[i]).abs() <= tol {
                        e[i] = 1.0;
                        gens.push(e);
                    }
                }
                gens
            }
        })
    }

    /// Cosine of the angle between `v` and the normal cone at `x`. The cone
    /// generators of every shape here are orthonormal, so the projection
    /// onto the cone is the sum of the positive parts along them.
    pub fn normal_cone_alignment(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        let nv = norm(v);
        if nv == 0.0 {
            return Ok(1.0);
        }
        let gens = self.outward_normals(x)?;
        let proj_sq: f64 = gens.iter().map(|g| libm::pow(dot(g, v).max(0.0), 2.0)).sum();
        Ok(libm::sqrt(proj_sq) / nv)
    }

    /// Samples boundary points, interior points and normals and evaluates
    /// the exterior-cone inequality and the test-function inequality with
    /// this domain's constants.
    pub fn check_admissibility(&self, n_samples: usize, seed: u64) -> AdmissibilityReport {
        check_conditions(self, self.c0, self.alpha, n_samples, seed)
    }

    pub(crate) fn sample_boundary(&self, rng: &mut Stream) -> Vec<f64> {
        let (lo, hi) = self.bounding_box();
        let c = self.center();
        let d = self.diameter();
        let mut p: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| l - d + (h - l + 2.0 * d) * rng.uniform()).collect();
        if self.contains_unchecked(&p) {
            let r = dist(&p, &c);
            if r == 0.0 {
                p[0] += 3.0 * d;
            } else {
                for (pi, ci) in p.iter_mut().zip(&c) {
                    *pi = ci + (*pi - ci) * (3.0 * d / r);
                }
            }
        }
        let mut out = vec![0.0; self.dim];
        // Presets always project; the ellipsoid root-find is bracketed.
        self.project_into(&p, &mut out).expect("projection of a sample point");
        out
    }

    pub(crate) fn sample_closure(&self, rng: &mut Stream) -> Vec<f64> {
        let (lo, hi) = self.bounding_box();
        for _ in 0..64 {
            let p: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| l + (h - l) * rng.uniform()).collect();
            if self.contains_unchecked(&p) {
                return p;
            }
        }
        self.center()
    }
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    for x in v.iter_mut() {
        *x /= n;
    }
}

/// Lagrange multiplier `t > 0` of the ellipsoid projection problem: the root
/// of `sum_i a_i^2 u_i^2 / (a_i^2 + t)^2 = 1`, `u = x - center`, which is
/// decreasing in `t`. Safeguarded Newton inside the bracket `[0, a_max |u|]`.
fn ellipsoid_multiplier(x: &[f64], center: &[f64], semi_axes: &[f64]) -> Result<f64> {
    let f = |t: f64| -> (f64, f64) {
        let mut v = -1.0;
        let mut dv = 0.0;
        for ((xi, ci), ai) in x.iter().zip(center).zip(semi_axes) {
            let a2 = ai * ai;
            let u = xi - ci;
            let q = a2 + t;
            v += a2 * u * u / (q * q);
            dv += -2.0 * a2 * u * u / (q * q * q);
        }
        (v, dv)
    };
    let amax = semi_axes.iter().cloned().fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0_f64, amax * dist(x, center));
    let mut t = 0.5 * hi;
    let mut residual = f64::INFINITY;
    for _ in 0..200 {
        let (v, dv) = f(t);
        residual = v.abs();
        if v > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if v == 0.0 || hi - lo <= 4.0 * f64::EPSILON * hi.max(f64::MIN_POSITIVE) {
            return Ok(t);
        }
        let newton = t - v / dv;
        t = if dv < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    if residual < 1e-12 {
        Ok(t)
    } else {
        Err(Error::ProjectionFailed { residual })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub boundary_point: Vec<f64>,
    pub other_point: Vec<f64>,
    pub normal: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub n_samples: usize,
    /// Worst `max_zeta (x - x', zeta) + c0 |x - x'|^2` over sampled pairs.
    pub exterior_cone_worst: f64,
    pub exterior_cone_pass: bool,
    pub exterior_cone_witness: Option<Witness>,
    /// Worst `(grad phi(x), zeta) + alpha c0` over sampled boundary normals.
    pub test_function_worst: f64,
    pub test_function_pass: bool,
    pub test_function_witness: Option<Witness>,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.exterior_cone_pass && self.test_function_pass
    }
}

/// [`DomainSpec::check_admissibility`] with explicit constants, so that
/// `c0 > 0` can be exercised against the convex presets.
pub fn check_conditions(domain: &DomainSpec, c0: f64, alpha: f64, n_samples: usize, seed: u64) -> AdmissibilityReport {
    let mut rng = Stream::new(seed, StreamTag::Admissibility, 0);
    let mut cone_worst = f64::INFINITY;
    let mut cone_witness = None;
    let mut phi_worst = f64::NEG_INFINITY;
    let mut phi_witness = None;
    for _ in 0..n_samples.max(1) {
        let x = domain.sample_boundary(&mut rng);
        let xp = domain.sample_closure(&mut rng);
        let Ok(mut normals) = domain.outward_normals(&x) else { continue };
        if normals.len() > 1 {
            // a random interior ray of the cone as well as its generators
            let mut mix = vec![0.0; domain.dim()];
            for g in &normals {
                let w = rng.uniform();
                for (m, gi) in mix.iter_mut().zip(g) {
                    *m += w * gi;
                }
            }
            normalize(&mut mix);
            normals.push(mix);
        }
        let diff: Vec<f64> = x.iter().zip(&xp).map(|(a, b)| a - b).collect();
        let d2 = dot(&diff, &diff);
        let (best, best_normal) = normals
            .iter()
            .map(|z| (dot(&diff, z) + c0 * d2, z))
            .fold((f64::NEG_INFINITY, &normals[0]), |acc, v| if v.0 > acc.0 { v } else { acc });
        if best < cone_worst {
            cone_worst = best;
            cone_witness = Some(Witness {
                boundary_point: x.clone(),
                other_point: xp.clone(),
                normal: best_normal.clone(),
                value: best,
            });
        }
        let grad = domain.phi().gradient(&x);
        for z in &normals {
            let v = dot(&grad, z) + alpha * c0;
            if v > phi_worst {
                phi_worst = v;
                phi_witness =
                    Some(Witness { boundary_point: x.clone(), other_point: grad.clone(), normal: z.clone(), value: v });
            }
        }
    }
    let exterior_cone_pass = cone_worst >= -ADMISSIBILITY_TOLERANCE;
    let test_function_pass = phi_worst <= ADMISSIBILITY_TOLERANCE;
    AdmissibilityReport {
        n_samples,
        exterior_cone_worst: cone_worst,
        exterior_cone_pass,
        exterior_cone_witness: if exterior_cone_pass { None } else { cone_witness },
        test_function_worst: phi_worst,
        test_function_pass,
        test_function_witness: if test_function_pass { None } else { phi_witness },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_ball() -> DomainSpec {
        DomainSpec::ball(&[0.0, 0.0], 1.0).unwrap()
    }

    fn presets() -> Vec<DomainSpec> {
        vec![
            DomainSpec::interval(0.0, 2.0).unwrap(),
            unit_ball(),
            DomainSpec::ball(&[0.5, -1.0, 2.0], 3.0).unwrap(),
            DomainSpec::axis_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap(),
            DomainSpec::axis_box(&[-1.0, 0.0, 2.0], &[1.0, 0.5, 3.0]).unwrap(),
            DomainSpec::ellipsoid(&[0.0, 0.0], &[2.0, 0.5]).unwrap(),
            DomainSpec::ellipsoid(&[1.0, 0.0, -1.0], &[1.0, 3.0, 0.7]).unwrap(),
        ]
    }

    #[test]
    fn membership_examples() {
        let b = unit_ball();
        assert!(b.contains_closure(&[0.0, 0.0]).unwrap());
        assert!(b.contains_closure(&[1.0, 0.0]).unwrap());
        assert!(!b.contains_closure(&[1.5, 0.0]).unwrap());
        assert_eq!(b.contains_closure(&[0.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn projection_examples() {
        assert_eq!(unit_ball().project(&[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(DomainSpec::interval(0.0, 2.0).unwrap().project(&[-0.3]).unwrap(), vec![0.0]);
        let bx = DomainSpec::axis_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(bx.project(&[1.4, -0.2]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(bx.project(&[0.3, 0.7]).unwrap(), vec![0.3, 0.7]);
    }

    #[test]
    fn ellipsoid_projection_is_closest() {
        let e = DomainSpec::ellipsoid(&[0.0, 0.0], &[2.0, 0.5]).unwrap();
        let x = [3.0, 1.0];
        let p = e.project(&x).unwrap();
        assert!(e.contains_closure(&p).unwrap());
        // brute force over a fine parametrization of the boundary
        let mut best = f64::INFINITY;
        for k in 0..200_000 {
            let th = 2.0 * PI * k as f64 / 200_000.0;
            let q = [2.0 * libm::cos(th), 0.5 * libm::sin(th)];
            best = best.min(dist(&x, &q));
        }
        assert!((dist(&x, &p) - best).abs() < 1e-8);
    }

    #[test]
    fn normal_examples() {
        assert_eq!(unit_ball().outward_normals(&[1.0, 0.0]).unwrap(), vec![vec![1.0, 0.0]]);
        let bx = DomainSpec::axis_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(bx.outward_normals(&[1.0, 1.0]).unwrap(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let iv = DomainSpec::interval(0.0, 2.0).unwrap();
        assert_eq!(iv.outward_normals(&[0.0]).unwrap(), vec![vec![-1.0]]);
        assert!(matches!(
            unit_ball().outward_normals(&[0.5, 0.0]),
            Err(Error::NotOnBoundary { gap }) if gap < 0.0
        ));
        assert!(matches!(
            unit_ball().outward_normals(&[1.5, 0.0]),
            Err(Error::NotOnBoundary { gap }) if gap > 0.0
        ));
    }

    #[test]
    fn invalid_constants_rejected() {
        let shape = Shape::Ball { center: vec![0.0, 0.0], radius: 1.0 };
        assert!(matches!(
            DomainSpec::with_constants(shape.clone(), Some(-0.5), None, None),
            Err(Error::InvalidDomain(_))
        ));
        assert!(DomainSpec::with_constants(shape.clone(), None, Some(0.0), None).is_err());
        assert!(DomainSpec::ball(&[0.0], 0.0).is_err());
        assert!(DomainSpec::interval(1.0, 1.0).is_err());
        assert!(DomainSpec::axis_box(&[0.0, 1.0], &[1.0, 1.0]).is_err());
        assert!(DomainSpec::ellipsoid(&[0.0, 0.0], &[1.0]).is_err());
    }

    #[test]
    fn every_preset_is_admissible() {
        for d in presets() {
            let r = d.check_admissibility(2000, 11);
            assert!(r.passed(), "{:?}: {:?}", d.shape(), r);
        }
    }

    #[test]
    fn positive_c0_path_is_evaluated() {
        // Convex sets satisfy the exterior-cone inequality for every c0 >= 0;
        // the test-function inequality then needs (grad phi, zeta) <= -alpha c0.
        let b = unit_ball();
        let r = check_conditions(&b, 0.5, 0.5, 500, 3);
        assert!(r.exterior_cone_pass);
        assert!(r.test_function_worst <= -1.0 + 0.25 + 1e-9);
        let r = check_conditions(&b, 10.0, 0.5, 500, 3);
        assert!(!r.test_function_pass);
        assert!(r.test_function_witness.is_some());
    }

    #[test]
    fn cosine_bump_derivatives_match_finite_differences() {
        let d = DomainSpec::axis_box(&[-1.0, 0.0, 2.0], &[1.0, 0.5, 3.0]).unwrap();
        let x = [0.3, 0.1, 2.9];
        let g = d.phi().gradient(&x);
        let h = d.phi().hessian(&x);
        let eps = 1e-5;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += eps;
            xm[i] -= eps;
            let fd = (d.phi().value(&xp) - d.phi().value(&xm)) / (2.0 * eps);
            assert!((fd - g[i]).abs() < 1e-8);
            let gp = d.phi().gradient(&xp);
            let gm = d.phi().gradient(&xm);
            for j in 0..3 {
                let fd2 = (gp[j] - gm[j]) / (2.0 * eps);
                assert!((fd2 - h[j * 3 + i]).abs() < 1e-7, "{i} {j}");
            }
        }
    }

    #[test]
    fn projection_properties_on_presets() {
        let mut rng = Stream::new(5, StreamTag::Sampling, 0);
        for d in presets() {
            let (lo, hi) = d.bounding_box();
            let diam = d.diameter();
            let ys: Vec<Vec<f64>> = (0..1000).map(|_| d.sample_closure(&mut rng)).collect();
            for _ in 0..1000 {
                let x: Vec<f64> =
                    lo.iter().zip(&hi).map(|(l, h)| l - diam + (h - l + 2.0 * diam) * rng.uniform()).collect();
                let p = d.project(&x).unwrap();
                assert!(d.contains_closure(&p).unwrap());
                assert_eq!(d.project(&p).unwrap(), p);
                let dp = dist(&x, &p);
                for y in &ys {
                    assert!(dp <= dist(&x, y) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn normals_are_unit_and_consistent_with_projection() {
        let mut rng = Stream::new(9, StreamTag::Sampling, 0);
        for d in presets() {
            let smooth = !matches!(d.shape(), Shape::AxisBox { .. });
            for _ in 0..300 {
                let x = d.sample_boundary(&mut rng);
                for z in d.outward_normals(&x).unwrap() {
                    assert!((norm(&z) - 1.0).abs() < 1e-12);
                    if smooth {
                        let out: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + 1e-3 * b).collect();
                        assert!(dist(&d.project(&out).unwrap(), &x) < 1e-9);
                    }
                }
            }
        }
    }
}
