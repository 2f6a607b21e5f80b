//! Counter-based random streams.
//!
//! Every uniform consumed by a simulation is addressed by
//! `(master_seed, path_index, step, substream)`. The address maps onto a
//! ChaCha8 keystream: the key comes from `master_seed`, the stream id is the
//! path index, and the word position is `6 * step + 2 * substream` (each
//! uniform consumes one 64-bit output, i.e. two 32-bit words). Paths can
//! therefore be simulated in any order, on any thread, and two simulations
//! sharing an address see the same number.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Substreams drawn at each step, in consumption order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    /// Colour draw `U`.
    U = 0,
    /// Uniform behind the black reinforcement `V`.
    V = 1,
    /// Uniform behind the white reinforcement `W`.
    W = 2,
}

const WORDS_PER_STEP: u128 = 6;
const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

/// Maps 64 random bits to a uniform on `[0, 1)` with 53-bit resolution.
#[inline]
pub fn bits_to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * TWO_POW_M53
}

/// The three uniforms used by one urn step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepUniforms {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

/// Sequential reader over one path's stream, starting at step 0.
#[derive(Debug, Clone)]
pub struct PathStream {
    rng: ChaCha8Rng,
}

impl PathStream {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(path_index);
        rng.set_word_pos(0);
        Self { rng }
    }

    /// Positions the reader at the start of `step`.
    pub fn seek(&mut self, step: u64) {
        self.rng.set_word_pos(step as u128 * WORDS_PER_STEP);
    }

    #[inline]
    pub fn next_step(&mut self) -> StepUniforms {
        let u = bits_to_unit(self.rng.next_u64());
        let v = bits_to_unit(self.rng.next_u64());
        let w = bits_to_unit(self.rng.next_u64());
        StepUniforms { u, v, w }
    }
}

/// Random access to a single uniform.
pub fn uniform_at(master_seed: u64, path_index: u64, step: u64, substream: Substream) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index);
    rng.set_word_pos(step as u128 * WORDS_PER_STEP + 2 * substream as u128);
    bits_to_unit(rng.next_u64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_matches_random_access() {
        let mut stream = PathStream::new(42, 7);
        for step in 0..50u64 {
            let s = stream.next_step();
            assert_eq!(s.u, uniform_at(42, 7, step, Substream::U));
            assert_eq!(s.v, uniform_at(42, 7, step, Substream::V));
            assert_eq!(s.w, uniform_at(42, 7, step, Substream::W));
        }
        stream.seek(3);
        assert_eq!(stream.next_step().w, uniform_at(42, 7, 3, Substream::W));
    }

    #[test]
    fn paths_and_seeds_are_distinct() {
        let a = PathStream::new(1, 0).next_step();
        let b = PathStream::new(1, 1).next_step();
        let c = PathStream::new(2, 0).next_step();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn unit_range() {
        assert_eq!(bits_to_unit(0), 0.0);
        assert!(bits_to_unit(u64::MAX) < 1.0);
        let mut s = PathStream::new(9, 9);
        let mut sum = 0.0;
        let n = 100_000;
        for _ in 0..n {
            let st = s.next_step();
            for x in [st.u, st.v, st.w] {
                assert!((0.0..1.0).contains(&x));
                sum += x;
            }
        }
        let mean = sum / (3 * n) as f64;
        // sd of the mean is 1/sqrt(12 * 3n) ~ 5.3e-4
        assert!((mean - 0.5).abs() < 4.0 * 5.3e-4);
    }
}
