//! Counter-based random streams.
//!
//! A stream is addressed by `(seed, trace, step)`. Every address yields an
//! independent sequence, so a trace can be replayed (or a single step
//! resampled) without touching any other stream, and traces can be
//! scheduled on any worker in any order.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Address of a stream: experiment seed, trace index, step index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub trace: u64,
    pub step: u64,
}

impl StreamKey {
    pub fn new(seed: u64, trace: u64, step: u64) -> Self {
        Self { seed, trace, step }
    }
}

/// SplitMix-style generator whose output is a pure function of
/// `(key, counter)`.
#[derive(Clone, Debug)]
pub struct CounterRng {
    id: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: StreamKey) -> Self {
        let mut id = mix64(key.seed ^ 0xD134_2543_DE82_EF95);
        id = mix64(id ^ key.trace.wrapping_mul(GOLDEN));
        id = mix64(id ^ key.step.wrapping_mul(0xA076_1D64_78BD_642F));
        Self { id, counter: 0 }
    }

    /// Stream for the given address.
    pub fn at(seed: u64, trace: u64, step: u64) -> Self {
        Self::new(StreamKey::new(seed, trace, step))
    }

    /// Uniform sample in `[0, 1)` with 53 random bits.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.id ^ mix64(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Uniform direction on the unit sphere (normalised Gaussian vector).
pub fn sample_unit_vector<R: RngCore + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for v in out.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *v = g;
            norm2 += g * g;
        }
        if norm2 > 1e-300 {
            let inv = 1.0 / norm2.sqrt();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

/// Uniform point in the ball of the given radius centred at `center`:
/// uniform direction times `radius * U^(1/n)`.
pub fn sample_in_ball<R: RngCore + ?Sized>(rng: &mut R, center: &[f64], radius: f64, out: &mut [f64]) {
    sample_unit_vector(rng, out);
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / center.len() as f64);
    for (o, c) in out.iter_mut().zip(center) {
        *o = c + r * *o;
    }
}
