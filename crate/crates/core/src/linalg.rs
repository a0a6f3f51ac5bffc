//! Small dense-vector helpers on slices. Dimensions here are 1 to 3 in
//! practice, so nothing is vectorized.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(norm_sq(a))
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(dist_sq(a, b))
}

/// Frobenius norm of a row-major `d x d` matrix.
#[inline]
pub fn frobenius(m: &[f64]) -> f64 {
    norm(m)
}

/// `out = m * v` for a row-major square matrix.
#[inline]
pub fn mat_vec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&m[i * d..(i + 1) * d], v);
    }
}

/// Sup over sample points of the Euclidean distance between two flat
/// point arrays of equal shape.
pub fn sup_dist(a: &[f64], b: &[f64], dim: usize) -> f64 {
    a.chunks_exact(dim).zip(b.chunks_exact(dim)).map(|(x, y)| dist(x, y)).fold(0.0, f64::max)
}

/// Solves `m x = rhs` for a row-major square matrix by Gaussian elimination
/// with partial pivoting. Returns `None` when a pivot vanishes.
pub fn solve(m: &[f64], rhs: &[f64]) -> Option<alloc::vec::Vec<f64>> {
    let d = rhs.len();
    let mut a = m.to_vec();
    let mut x = rhs.to_vec();
    for col in 0..d {
        let piv = (col..d).max_by(|&i, &j| a[i * d + col].abs().total_cmp(&a[j * d + col].abs()))?;
        if a[piv * d + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for j in 0..d {
                a.swap(col * d + j, piv * d + j);
            }
            x.swap(col, piv);
        }
        for r in col + 1..d {
            let f = a[r * d + col] / a[col * d + col];
            for j in col..d {
                a[r * d + j] -= f * a[col * d + j];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..d).rev() {
        let mut s = x[col];
        for j in col + 1..d {
            s -= a[col * d + j] * x[j];
        }
        x[col] = s / a[col * d + col];
    }
    Some(x)
}
