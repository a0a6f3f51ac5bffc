//! Brownian increments on nested dyadic grids.
//!
//! Increments are built by midpoint (Lévy) refinement: `B(1)` comes from
//! node 0 of level 0, and the increment `D` of an interval of length `h` at
//! level `l - 1` splits into `D/2 + (sqrt(h)/2) Z` and the remainder, with `Z`
//! node `j` of level `l`. Every normal is addressed by
//! `(seed, path_index, level, dim, node)`, so the level-`n` increments are a
//! pure function of `(seed, path_index)` and the level-`n+1` increments sum
//! pairwise to the level-`n` ones (up to one rounding). Coupled coarse and
//! fine paths therefore see the same Brownian motion.

use alloc::vec;
use alloc::vec::Vec;

use crate::rng::{CounterKey, StreamTag};

/// Reusable buffers for [`fill_increments`].
#[derive(Debug, Clone, Default)]
pub struct BridgeBuffers {
    scratch: Vec<f64>,
    coord: Vec<f64>,
}

/// Writes the `2^level` increments of each coordinate of the `dim`-dimensional
/// Brownian path `(seed, path_index)` into `out`, laid out step-major
/// (`out[k * dim + i]`).
pub fn fill_increments(
    seed: u64,
    path_index: u64,
    level: u32,
    dim: usize,
    out: &mut Vec<f64>,
    bufs: &mut BridgeBuffers,
) {
    let n = 1usize << level;
    out.clear();
    out.resize(n * dim, 0.0);
    for i in 0..dim {
        coordinate_increments(seed, path_index, level, i, &mut bufs.coord, &mut bufs.scratch);
        for (k, v) in bufs.coord.iter().enumerate() {
            out[k * dim + i] = *v;
        }
    }
}

pub fn increments(seed: u64, path_index: u64, level: u32, dim: usize) -> Vec<f64> {
    let mut out = Vec::new();
    fill_increments(seed, path_index, level, dim, &mut out, &mut BridgeBuffers::default());
    out
}

fn coordinate_increments(
    seed: u64,
    path_index: u64,
    level: u32,
    coord: usize,
    cur: &mut Vec<f64>,
    next: &mut Vec<f64>,
) {
    let mut key = CounterKey { seed, tag: StreamTag::Brownian, level: 0, dim: coord as u16, index: path_index };
    cur.clear();
    cur.push(key.normal(0));
    let mut h = 1.0f64;
    for l in 1..=level {
        key.level = l as u8;
        let half_sd = 0.5 * libm::sqrt(h);
        next.clear();
        next.reserve(cur.len() * 2);
        for (pair, chunk) in cur.chunks(2).enumerate() {
            let z = key.normals(pair as u32);
            for (j, &d) in chunk.iter().enumerate() {
                let left = 0.5 * d + half_sd * z[j];
                next.push(left);
                next.push(d - left);
            }
        }
        core::mem::swap(cur, next);
        h *= 0.5;
    }
}

/// Sums consecutive blocks of `2^(fine - coarse)` steps of step-major
/// increments.
pub fn aggregate(fine: &[f64], dim: usize, fine_level: u32, coarse_level: u32) -> Vec<f64> {
    assert!(coarse_level <= fine_level);
    let block = 1usize << (fine_level - coarse_level);
    let n = 1usize << coarse_level;
    let mut out = vec![0.0; n * dim];
    for k in 0..n {
        for j in 0..block {
            for i in 0..dim {
                out[k * dim + i] += fine[(k * block + j) * dim + i];
            }
        }
    }
    out
}
