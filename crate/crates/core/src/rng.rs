//! Seeded random streams.
//!
//! Every stochastic routine in the crate draws from an explicit [`RngStream`].
//! A stream is identified by `(seed, stream_id)` and is backed by ChaCha8, a
//! counter-based generator whose output is fully specified and identical on
//! every platform. The 64-bit seed is expanded to a 256-bit key with the PCG32
//! expansion of `rand_core::SeedableRng::seed_from_u64`; the stream id selects
//! the ChaCha nonce.
//!
//! Uniforms on `[0, 1)` take the top 53 bits of one `u64` draw. Normal draws
//! use the Box-Muller transform on two such uniforms, yielding a pair; the
//! second member of the pair is returned by the next call.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh, independent stream under the same master seed. The derived id
    /// depends only on `(stream_id, child)`, never on how many draws were made.
    pub fn derive(&self, child: u64) -> RngStream {
        RngStream::new(self.seed, splitmix64(self.stream_id ^ splitmix64(child)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        let v = lo + (hi - lo) * self.uniform();
        // rounding can land exactly on hi
        if v >= hi {
            lo.max(hi - (hi - lo) * f64::EPSILON)
        } else {
            v
        }
    }

    /// Uniform integer in `0..bound` by rejection sampling.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Fisher-Yates shuffle of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i as u64 + 1) as usize;
            idx.swap(i, j);
        }
        idx
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `len` independent draws from `Normal(0, sigma^2)`. `sigma = 0` gives zeros
/// without consuming randomness.
pub fn gaussian_vector(len: usize, sigma: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Argument(format!(
            "noise standard deviation must be finite and nonnegative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(vec![0.0; len]);
    }
    Ok((0..len).map(|_| sigma * rng.standard_normal()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_gives_zero_vector() {
        let mut rng = RngStream::new(7, 0);
        assert_eq!(gaussian_vector(5, 0.0, &mut rng).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn negative_sigma_rejected() {
        let mut rng = RngStream::new(7, 0);
        assert!(matches!(
            gaussian_vector(3, -1.0, &mut rng),
            Err(Error::Argument(_))
        ));
        assert!(gaussian_vector(3, f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn large_sample_standard_deviation() {
        let mut rng = RngStream::new(42, 0);
        let v = gaussian_vector(100_000, 1.0, &mut rng).unwrap();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var.sqrt() - 1.0).abs() < 0.01, "sd = {}", var.sqrt());
        assert!(mean.abs() < 0.01);
    }

    #[test]
    fn identical_streams_reproduce() {
        let a = gaussian_vector(64, 2.5, &mut RngStream::new(3, 9)).unwrap();
        let b = gaussian_vector(64, 2.5, &mut RngStream::new(3, 9)).unwrap();
        assert_eq!(a, b);
        let c = gaussian_vector(64, 2.5, &mut RngStream::new(3, 10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn derived_streams_ignore_parent_position() {
        let mut parent = RngStream::new(11, 4);
        let before = parent.derive(1).next_u64();
        parent.next_u64();
        assert_eq!(parent.derive(1).next_u64(), before);
        assert_ne!(parent.derive(2).next_u64(), before);
    }

    #[test]
    fn uniform_range_is_half_open() {
        let mut rng = RngStream::new(1, 1);
        for _ in 0..10_000 {
            let v = rng.uniform_range(0.0, 10.0);
            assert!((0.0..10.0).contains(&v));
        }
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut rng = RngStream::new(5, 0);
        let mut p = rng.permutation(50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}
