//! Counter-based random numbers.
//!
//! Every random quantity in the crate is a pure function of a 64-bit seed and
//! a 128-bit counter, evaluated with the Philox4x32-10 block function. There is
//! no generator state to share or advance, so paths can be simulated in any
//! order, on any number of threads, and always see the same numbers.
//!
//! Counter layout used throughout:
//!
//! | word | content                                   |
//! |------|-------------------------------------------|
//! | c0   | block index within the stream             |
//! | c1   | `level | dim << 8 | tag << 24`            |
//! | c2   | low 32 bits of the path index             |
//! | c3   | high 32 bits of the path index            |

use core::f64::consts::PI;

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = (a as u64) * (b as u64);
    ((p >> 32) as u32, p as u32)
}

/// The Philox4x32 block function with 10 rounds.
#[inline]
pub fn philox4x32(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Independent substreams. The tag occupies the top byte of counter word 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamTag {
    Brownian = 1,
    InitialLaw = 2,
    Optimizer = 3,
    Admissibility = 4,
    Sampling = 5,
}

/// Address of one block of four 32-bit words.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterKey {
    pub seed: u64,
    pub tag: StreamTag,
    pub level: u8,
    pub dim: u16,
    pub index: u64,
}

impl CounterKey {
    pub fn new(seed: u64, tag: StreamTag, index: u64) -> Self {
        Self { seed, tag, level: 0, dim: 0, index }
    }

    #[inline]
    fn words(&self, block: u32) -> [u32; 4] {
        let c1 = (self.level as u32) | ((self.dim as u32) << 8) | ((self.tag as u32) << 24);
        let counter = [block, c1, self.index as u32, (self.index >> 32) as u32];
        philox4x32(counter, [self.seed as u32, (self.seed >> 32) as u32])
    }

    /// Two uniforms in the open interval (0, 1) with 52 random bits each.
    #[inline]
    pub fn uniforms(&self, block: u32) -> [f64; 2] {
        let w = self.words(block);
        [to_open_unit(((w[0] as u64) << 32) | w[1] as u64), to_open_unit(((w[2] as u64) << 32) | w[3] as u64)]
    }

    /// Two independent standard normals (Box–Muller on [`Self::uniforms`]).
    #[inline]
    pub fn normals(&self, block: u32) -> [f64; 2] {
        let [u1, u2] = self.uniforms(block);
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let (s, c) = libm::sincos(2.0 * PI * u2);
        [r * c, r * s]
    }

    /// Standard normal number `i` of this stream.
    #[inline]
    pub fn normal(&self, i: u64) -> f64 {
        self.normals((i >> 1) as u32)[(i & 1) as usize]
    }
}

#[inline]
fn to_open_unit(x: u64) -> f64 {
    ((x >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Sequential reader over a [`CounterKey`] stream, for places where a
/// conventional "next number" interface is convenient (optimizer restarts,
/// diagnostics sampling).
#[derive(Debug, Clone)]
pub struct Stream {
    key: CounterKey,
    next: u64,
}

impl Stream {
    pub fn new(seed: u64, tag: StreamTag, index: u64) -> Self {
        Self { key: CounterKey::new(seed, tag, index), next: 0 }
    }

    pub fn uniform(&mut self) -> f64 {
        let u = self.key.uniforms((self.next >> 1) as u32)[(self.next & 1) as usize];
        self.next += 1;
        u
    }

    pub fn normal(&mut self) -> f64 {
        let z = self.key.normal(self.next);
        self.next += 1;
        z
    }
}
