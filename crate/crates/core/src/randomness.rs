//! Deterministic, splittable random streams.
//!
//! A [`StreamKey`] names a stream by a master seed plus a structural path
//! (realization, replicate, branch, node, ...). The key is hashed with SHA-256
//! into the 256-bit key of a ChaCha12 block cipher running in counter mode, so
//! the stream for a key never depends on which other streams were created, in
//! which order, or on which thread.
//!
//! Every primitive is drawn by inverse-CDF from a single uniform, so the
//! number of raw draws per call is fixed.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{check_nonneg, check_positive, Result};

const DOMAIN_TAG: &[u8] = b"cftpp/stream/v1";

/// Path component kinds. The numeric value is part of the hashed key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Label {
    Realization = 1,
    Replicate = 2,
    Branch = 3,
    Node = 4,
    Edge = 5,
    Stage = 6,
    Run = 7,
    Block = 8,
}

/// Named `Label::Stage` indices used across the crate.
pub mod stage {
    pub const FACTUAL: u64 = 1;
    pub const COUNTERFACTUAL: u64 = 2;
    pub const REJECTIONS: u64 = 3;
    pub const ACCEPTANCE: u64 = 4;
    pub const ASSIGN: u64 = 5;
    pub const INTERVENTION: u64 = 6;
    pub const NETWORK: u64 = 7;
    pub const RECOVERY: u64 = 8;
    pub const SEEDS: u64 = 9;
    pub const BOOTSTRAP: u64 = 10;
    pub const OFFSPRING: u64 = 11;
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    master_seed: u64,
    path: Vec<(Label, u64)>,
}

impl StreamKey {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            path: Vec::new(),
        }
    }

    /// Key of a sub-stream; the parent key is left untouched.
    pub fn child(&self, label: Label, index: u64) -> Self {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push((label, index));
        Self {
            master_seed: self.master_seed,
            path,
        }
    }

    pub fn stage(&self, index: u64) -> Self {
        self.child(Label::Stage, index)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[(Label, u64)] {
        &self.path
    }

    pub fn stream(&self) -> Stream {
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN_TAG);
        hasher.update(self.master_seed.to_le_bytes());
        for &(label, index) in &self.path {
            hasher.update([label as u8]);
            hasher.update(index.to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        Stream {
            rng: ChaCha12Rng::from_seed(seed),
        }
    }
}

/// A single logical random stream. Not shared between tasks.
#[derive(Clone, Debug)]
pub struct Stream {
    rng: ChaCha12Rng,
}

impl Stream {
    /// Uniform draw on the open interval (0, 1), 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn exponential(&mut self, rate: f64) -> Result<f64> {
        check_positive("rate", rate)?;
        Ok(exponential_from_uniform(self.uniform(), rate))
    }

    pub fn gumbel(&mut self) -> f64 {
        gumbel_from_uniform(self.uniform())
    }

    pub fn normal(&mut self, sigma: f64) -> Result<f64> {
        check_nonneg("sigma", sigma)?;
        Ok(sigma * standard_normal_from_uniform(self.uniform()))
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Derives a fresh key from this stream, for callers that need to fan
    /// out keyed sub-streams from a single stream argument.
    pub fn split_key(&mut self) -> StreamKey {
        StreamKey::new(self.rng.next_u64())
    }

    /// Uniform index in `0..n`; `n` must be nonzero.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

pub fn exponential_from_uniform(u: f64, rate: f64) -> f64 {
    -u.ln() / rate
}

pub fn gumbel_from_uniform(u: f64) -> f64 {
    -(-u.ln()).ln()
}

pub fn standard_normal_from_uniform(u: f64) -> f64 {
    // Normal::new(0, 1) cannot fail.
    Normal::standard().inverse_cdf(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draws(key: &StreamKey, n: usize) -> Vec<f64> {
        let mut s = key.stream();
        (0..n).map(|_| s.uniform()).collect()
    }

    #[test]
    fn replay_is_bit_identical() {
        let key = StreamKey::new(42).child(Label::Realization, 7);
        let a = draws(&key, 100);
        let b = draws(&key.clone(), 100);
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn path_order_matters() {
        let root = StreamKey::new(1);
        let a = root.child(Label::Node, 1).child(Label::Node, 2);
        let b = root.child(Label::Node, 2).child(Label::Node, 1);
        assert_ne!(draws(&a, 4), draws(&b, 4));
        assert_ne!(draws(&root, 4), draws(&StreamKey::new(2), 4));
    }

    #[test]
    fn uniform_mean() {
        let v = draws(&StreamKey::new(3), 100_000);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
        assert!(v.iter().all(|&u| u > 0.0 && u < 1.0));
    }

    #[test]
    fn cross_stream_correlation() {
        let root = StreamKey::new(11);
        let a = draws(&root.child(Label::Replicate, 0), 100_000);
        let b = draws(&root.child(Label::Replicate, 1), 100_000);
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n;
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / n;
        let r = cov / (va * vb).sqrt();
        assert!(r.abs() < 0.01, "{r}");
    }

    #[test]
    fn inverse_cdf_identities() {
        let x = exponential_from_uniform((-2.0f64).exp(), 2.0);
        assert!((x - 1.0).abs() < 1e-15);
        let g = gumbel_from_uniform((-1.0f64).exp());
        assert!(g.abs() < 1e-15);
    }

    #[test]
    fn exponential_means() {
        let mut s = StreamKey::new(5).stream();
        let n = 100_000;
        let m1 = (0..n).map(|_| s.exponential(1.0).unwrap()).sum::<f64>() / n as f64;
        assert!((m1 - 1.0).abs() < 0.01, "{m1}");
        let m2 = (0..n).map(|_| s.exponential(1.0 / 11.4).unwrap()).sum::<f64>() / n as f64;
        // 3 sigma = 3 * 11.4 / sqrt(n)
        assert!((m2 - 11.4).abs() < 0.11, "{m2}");
        assert!(s.exponential(0.0).is_err());
        assert!(s.exponential(-1.0).is_err());
    }

    #[test]
    fn gumbel_moments() {
        let mut s = StreamKey::new(6).stream();
        let n = 100_000;
        let v: Vec<f64> = (0..n).map(|_| s.gumbel()).collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.577_215_664_9).abs() < 0.02, "{mean}");
        let below = v.iter().filter(|&&g| g <= 0.0).count() as f64 / n as f64;
        assert!((below - (-1.0f64).exp()).abs() < 0.005, "{below}");
    }

    #[test]
    fn normal_moments_and_scaling() {
        let key = StreamKey::new(8);
        let mut s = key.stream();
        assert_eq!(s.normal(0.0).unwrap(), 0.0);
        assert!(s.normal(-1.0).is_err());

        let n = 100_000;
        let mut s = key.stream();
        let v: Vec<f64> = (0..n).map(|_| s.normal(1.0).unwrap()).collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "{mean}");
        assert!((var - 1.0).abs() < 0.02, "{var}");

        let mut a = key.stream();
        let mut b = key.stream();
        for _ in 0..1000 {
            assert_eq!(a.normal(2.0).unwrap(), 2.0 * b.normal(1.0).unwrap());
        }
    }
}
