//! Counter-based random streams.
//!
//! Every draw is addressed by (master seed, run index, step index): the
//! master seed keys a ChaCha8 block cipher, the run index selects its 64-bit
//! stream id and the step index fixes the word position. Draws therefore do
//! not depend on how runs are scheduled across threads, and any step of any
//! run can be regenerated in isolation.

use crate::vec3::Vec3;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use std::f64::consts::TAU;

const DOMAIN_NOISE: u64 = 0;
const DOMAIN_AUX: u64 = 1;
/// 32-bit words consumed per step: four u64 feed two Box–Muller pairs.
const WORDS_PER_STEP: u128 = 8;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A 64-bit digest of (master, run), reported in diagnostics so a failing
/// ensemble member can be identified and replayed.
pub fn derived_seed(master_seed: u64, run_index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(run_index))
}

fn keyed_rng(master_seed: u64, run_index: u64, domain: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut s = master_seed;
    for chunk in key.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream((run_index << 1) | domain);
    rng
}

#[inline]
fn open01(x: u64) -> f64 {
    // (0, 1]: never zero, safe under ln
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn unit01(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn box_muller(a: u64, b: u64) -> (f64, f64) {
    let r = (-2.0 * open01(a).ln()).sqrt();
    let (s, c) = (TAU * unit01(b)).sin_cos();
    (r * c, r * s)
}

/// Per-run thermal-noise stream: three standard normals per step index.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    next_step: u64,
}

impl NoiseStream {
    pub fn new(master_seed: u64, run_index: u64) -> Self {
        NoiseStream {
            rng: keyed_rng(master_seed, run_index, DOMAIN_NOISE),
            next_step: 0,
        }
    }

    /// Three independent N(0, 1) draws belonging to `step`.
    pub fn normals3(&mut self, step: u64) -> Vec3 {
        if step != self.next_step {
            self.rng.set_word_pos(step as u128 * WORDS_PER_STEP);
        }
        let (a, b, c, d) = (
            self.rng.next_u64(),
            self.rng.next_u64(),
            self.rng.next_u64(),
            self.rng.next_u64(),
        );
        self.next_step = step + 1;
        let (n0, n1) = box_muller(a, b);
        let (n2, _) = box_muller(c, d);
        Vec3::new(n0, n1, n2)
    }
}

/// Sequential auxiliary stream of a run (initial-condition sampling,
/// synthetic test data). Disjoint from the run's noise stream.
#[derive(Clone, Debug)]
pub struct AuxStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl AuxStream {
    pub fn new(master_seed: u64, run_index: u64) -> Self {
        AuxStream {
            rng: keyed_rng(master_seed, run_index, DOMAIN_AUX),
            spare: None,
        }
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        unit01(self.rng.next_u64())
    }

    /// Uniform in (0, 1].
    pub fn uniform_open(&mut self) -> f64 {
        open01(self.rng.next_u64())
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(s) = self.spare.take() {
            return s;
        }
        let (a, b) = box_muller(self.rng.next_u64(), self.rng.next_u64());
        self.spare = Some(b);
        a
    }
}
