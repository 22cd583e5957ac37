//! Deterministic randomness for experiment construction.
//!
//! Streams are ChaCha8 keyed by the master seed with one stream id per
//! purpose, so regenerating any single artifact (phantom, mask, noise, ...)
//! is independent of the others. Gaussian samples come from the Box-Muller
//! transform over `next_f64` uniforms, which keeps the byte-level stream
//! easy to reproduce outside this codebase:
//!
//!   u1, u2 = uniform [0, 1) (53-bit)
//!   z0 = sqrt(-2 ln(1 - u1)) cos(2 pi u2)
//!   z1 = sqrt(-2 ln(1 - u1)) sin(2 pi u2)

use gksm_core::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream ids, one per artifact.
#[derive(Debug, Clone, Copy)]
pub enum Purpose {
    Phantom = 1,
    Sensitivities = 2,
    Mask = 3,
    Noise = 4,
    Probes = 5,
}

pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(master_seed: u64, purpose: Purpose) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(purpose as u64);
        Self { rng }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// A standard normal pair via Box-Muller.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        (r * theta.cos(), r * theta.sin())
    }

    /// Circularly symmetric complex Gaussian with E|z|^2 = 1.
    pub fn complex_normal(&mut self) -> Complex64 {
        let (a, b) = self.normal_pair();
        Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
    }
}
