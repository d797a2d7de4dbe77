//! Normal draws keyed by `(seed, path, step)`.
//!
//! Each path is its own ChaCha stream. Normal number `k * dim + j` of a path is the
//! `j`-th draw of step `k`; pairs come from one Box-Muller transform of two fixed
//! words each, so the draws of step `k` do not depend on how the path was reached.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub(crate) struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64, path: u64, start_step: u64, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path);
        let first = start_step as u128 * dim as u128;
        // Each pair uses two u64, i.e. four 32-bit words.
        rng.set_word_pos((first / 2) * 4);
        let mut s = NormalStream { rng, spare: None };
        if first % 2 == 1 {
            let (_, b) = s.pair();
            s.spare = Some(b);
        }
        s
    }

    #[inline]
    fn pair(&mut self) -> (f64, f64) {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        // (0, 1]
        let u1 = ((self.rng.next_u64() >> 11) as f64 + 1.0) * SCALE;
        let u2 = (self.rng.next_u64() >> 11) as f64 * SCALE;
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }

    /// Standard normals for the next step.
    #[inline]
    pub fn fill(&mut self, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = match self.spare.take() {
                Some(z) => z,
                None => {
                    let (a, b) = self.pair();
                    self.spare = Some(b);
                    a
                }
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyed_by_step() {
        for dim in [1usize, 2, 3] {
            for skip in [1usize, 4, 5] {
                let mut a = NormalStream::new(7, 3, 0, dim);
                let mut buf = vec![0.0; dim];
                for _ in 0..skip {
                    a.fill(&mut buf);
                }
                let mut b = NormalStream::new(7, 3, skip as u64, dim);
                let (mut x, mut y) = (vec![0.0; dim], vec![0.0; dim]);
                a.fill(&mut x);
                b.fill(&mut y);
                assert_eq!(x, y, "dim {dim} skip {skip}");
            }
        }
    }

    #[test]
    fn paths_are_distinct() {
        let mut a = NormalStream::new(7, 0, 0, 1);
        let mut b = NormalStream::new(7, 1, 0, 1);
        let (mut x, mut y) = ([0.0], [0.0]);
        a.fill(&mut x);
        b.fill(&mut y);
        assert_ne!(x, y);
    }

    #[test]
    fn moments() {
        let mut s = NormalStream::new(1, 0, 0, 1);
        let mut buf = [0.0];
        let (mut m1, mut m2, mut lag) = (0.0, 0.0, 0.0);
        let mut prev = 0.0;
        let n = 200_000;
        for _ in 0..n {
            s.fill(&mut buf);
            m1 += buf[0];
            m2 += buf[0] * buf[0];
            lag += buf[0] * prev;
            prev = buf[0];
        }
        let (m1, m2, lag) = (m1 / n as f64, m2 / n as f64, lag / n as f64);
        assert!(m1.abs() < 0.01 && (m2 - 1.0).abs() < 0.015 && lag.abs() < 0.01, "{m1} {m2} {lag}");
    }
}
