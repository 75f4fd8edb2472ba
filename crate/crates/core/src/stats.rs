//! Seeded random streams and order-independent summary statistics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Independent stream for one replica: ChaCha keyed by `seed`, stream id `replica`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Pairwise summation; the result depends only on the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        values.iter().sum()
    } else {
        let (left, right) = values.split_at(values.len() / 2);
        pairwise_sum(left) + pairwise_sum(right)
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    #[serde(rename = "value")]
    pub mean: f64,
    pub std_error: f64,
    #[serde(rename = "n")]
    pub n_samples: usize,
    pub seed: u64,
}

impl EstimatorResult {
    /// Sample mean with `std_error = sd / √n`.
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let n = samples.len();
        let mean = pairwise_sum(samples) / n as f64;
        let var = sample_variance(samples, mean);
        Self {
            mean,
            std_error: (var / n as f64).sqrt(),
            n_samples: n,
            seed,
        }
    }

    /// Number of standard errors between the estimate and `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.std_error == 0.0 {
            if self.mean == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - target).abs() / self.std_error
        }
    }

    pub fn agrees_with(&self, target: f64, n_sigma: f64) -> bool {
        self.z_score(target) <= n_sigma
    }
}

pub(crate) fn sample_variance(samples: &[f64], mean: f64) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let sq: Vec<f64> = samples.iter().map(|v| (v - mean) * (v - mean)).collect();
    pairwise_sum(&sq) / (n - 1) as f64
}

/// Unbiased sample variance together with its large-sample standard error
/// `√((m₄ − s⁴(n−3)/(n−1)) / n)`.
pub(crate) fn variance_estimate(samples: &[f64], seed: u64) -> EstimatorResult {
    let n = samples.len();
    let mean = pairwise_sum(samples) / n as f64;
    let var = sample_variance(samples, mean);
    let fourth: Vec<f64> = samples.iter().map(|v| (v - mean).powi(4)).collect();
    let m4 = pairwise_sum(&fourth) / n as f64;
    let nf = n as f64;
    let spread = (m4 - var * var * (nf - 3.0) / (nf - 1.0)).max(0.0);
    EstimatorResult {
        mean: var,
        std_error: (spread / nf).sqrt(),
        n_samples: n,
        seed,
    }
}
