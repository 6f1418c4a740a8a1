//! Seeded random streams.
//!
//! Each consumer (a chain, a trainer, a data generator) owns an [`RngStream`]
//! identified by `(seed, stream)`. Streams with the same seed but different
//! stream ids are independent ChaCha keystreams, so parallel chains never share
//! state and results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Well-known stream ids. Chains use `CHAIN_BASE + chain_index`.
pub mod streams {
    pub const DATA: u64 = 1;
    pub const CLASSIFIER: u64 = 2;
    pub const DAE: u64 = 3;
    pub const GENERATOR: u64 = 4;
    pub const INIT: u64 = 5;
    pub const CHAIN_BASE: u64 = 1 << 32;
}

#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngStream { inner }
    }

    pub fn for_chain(seed: u64, chain: usize) -> Self {
        RngStream::new(seed, streams::CHAIN_BASE + chain as u64)
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Draws a tensor of i.i.d. `N(mean, sigma^2)` values. `sigma == 0` returns the
/// constant tensor without consuming randomness.
pub fn rng_normal(shape: &[usize], mean: f64, sigma: f64, rng: &mut RngStream) -> Result<Tensor> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("rng_normal: sigma must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Tensor::full(shape, mean);
    }
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| mean + sigma * rng.normal()).collect();
    Tensor::new(shape.to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_constant() {
        let mut rng = RngStream::new(1, 0);
        let t = rng_normal(&[3, 2], 0.25, 0.0, &mut rng).unwrap();
        assert!(t.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn negative_sigma_rejected() {
        let mut rng = RngStream::new(1, 0);
        assert!(rng_normal(&[2], 0.0, -1.0, &mut rng).is_err());
        assert!(rng_normal(&[2], 0.0, f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn same_seed_same_draws() {
        let a = rng_normal(&[64], 0.0, 1.0, &mut RngStream::new(9, 3)).unwrap();
        let b = rng_normal(&[64], 0.0, 1.0, &mut RngStream::new(9, 3)).unwrap();
        assert!(a.bit_eq(&b));
        let c = rng_normal(&[64], 0.0, 1.0, &mut RngStream::new(9, 4)).unwrap();
        assert!(!a.bit_eq(&c));
    }

    #[test]
    fn million_draws_mean_within_clt_bound() {
        let n = 1_000_000;
        let (mean, sigma) = (2.0, 3.0);
        let t = rng_normal(&[n], mean, sigma, &mut RngStream::new(42, 0)).unwrap();
        let bound = 4.0 * sigma / (n as f64).sqrt();
        assert!((t.mean() - mean).abs() < bound, "mean {} bound {}", t.mean(), bound);
    }
}
