//! Random Fourier features for the Gaussian kernel
//! `k(x, x′) = exp(−‖x − x′‖² / (2·bandwidth²))`.
//!
//! `Φ(x)_j = √(2/D)·cos(ω_jᵀx + b_j)` with `ω_j ~ N(0, bandwidth⁻²·I)` and
//! `b_j ~ U[0, 2π)`, so `Φ(x)ᵀΦ(x′)` is an unbiased estimate of `k(x, x′)`.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{check_dim, invalid, Result};
use crate::linalg;
use crate::model::Sample;

#[derive(Debug, Clone, PartialEq)]
pub struct RffMap {
    input_dim: usize,
    /// `D × d`, row-major.
    omega: Vec<f64>,
    bias: Vec<f64>,
}

impl RffMap {
    pub fn new(input_dim: usize, features: usize, bandwidth: f64, seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(invalid("input dimension must be >= 1"));
        }
        if features == 0 {
            return Err(invalid("feature count D must be >= 1"));
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(invalid(format!("bandwidth must be > 0, got {bandwidth}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = (0..features * input_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal) / bandwidth)
            .collect();
        let two_pi = 2.0 * core::f64::consts::PI;
        let bias = (0..features).map(|_| rng.random::<f64>() * two_pi).collect();
        Ok(Self { input_dim, omega, bias })
    }

    /// Map with explicit frequencies (`D × d`, row-major) and phases.
    pub fn from_parts(input_dim: usize, omega: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if input_dim == 0 || bias.is_empty() {
            return Err(invalid("empty random feature map"));
        }
        check_dim(bias.len() * input_dim, omega.len())?;
        Ok(Self { input_dim, omega, bias })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.bias.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim, x.len())?;
        let scale = libm::sqrt(2.0 / self.output_dim() as f64);
        Ok(self
            .omega
            .chunks_exact(self.input_dim)
            .zip(&self.bias)
            .map(|(w, b)| scale * libm::cos(linalg::dot(w, x) + b))
            .collect())
    }

    pub fn transform(&self, dataset: &Dataset) -> Result<Dataset> {
        let samples = dataset
            .samples
            .iter()
            .map(|s| Ok(Sample::new(self.apply(&s.features)?, s.label)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { dim: self.output_dim(), labels: dataset.labels, samples })
    }
}

/// Draws a map with `features` outputs and applies it to `dataset`.
pub fn rff_transform(dataset: &Dataset, features: usize, bandwidth: f64, seed: u64) -> Result<Dataset> {
    RffMap::new(dataset.dim, features, bandwidth, seed)?.transform(dataset)
}

/// Median heuristic: the median Euclidean distance over pairs of a
/// subsample of at most `max_points` samples (chosen without replacement
/// with `seed`).
pub fn median_pairwise_distance(samples: &[Sample], max_points: usize, seed: u64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(invalid("median heuristic needs at least two samples"));
    }
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    let take = max_points.clamp(2, samples.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // partial Fisher-Yates
    for i in 0..take {
        let j = rng.random_range(i..idx.len());
        idx.swap(i, j);
    }
    idx.truncate(take);
    let mut d = Vec::with_capacity(take * (take - 1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            d.push(libm::sqrt(linalg::dist_sq(&samples[i].features, &samples[j].features)));
        }
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let median = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
    if !(median > 0.0) {
        return Err(invalid("median pairwise distance is zero; pick a bandwidth explicitly"));
    }
    Ok(median)
}
