//! Deterministic sample generation: seeded RNGs and scrambled Halton points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u32; 32] =
    [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut f, mut r) = (inv, 0.0);
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton points in `[0,1)^dim` with a seeded Cranley–Patterson rotation.
///
/// Dimensions beyond the prime table fall back to plain pseudo-random draws.
pub fn halton(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let shift: Vec<f64> = (0..dim).map(|_| r.gen::<f64>()).collect();
    (0..count)
        .map(|i| {
            (0..dim)
                .map(|d| match PRIMES.get(d) {
                    Some(&p) => (radical_inverse(i as u64 + 1, p as u64) + shift[d]).fract(),
                    None => r.gen::<f64>(),
                })
                .collect()
        })
        .collect()
}

/// Axis-aligned box, given by per-coordinate bounds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SampleBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SampleBox {
    /// `[-half, half]^dim`.
    pub fn cube(dim: usize, half: f64) -> Self {
        SampleBox { lo: vec![-half; dim], hi: vec![half; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Maps a unit-cube point into the box.
    pub fn map(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter().zip(self.lo.iter().zip(&self.hi)).map(|(u, (l, h))| l + u * (h - l)).collect()
    }

    pub fn halton(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        halton(self.dim(), count, seed).iter().map(|u| self.map(u)).collect()
    }
}
