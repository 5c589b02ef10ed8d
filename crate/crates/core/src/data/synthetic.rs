use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, LabeledSample};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub classes: usize,
    pub dim: usize,
    pub separation: f64,
}

/// Gaussian mixture with unit-variance isotropic clusters.
///
/// When `dim >= classes` the class means sit on scaled coordinate axes so every
/// pair of means is exactly `separation` apart; otherwise the means are random
/// directions of the same norm. Labels are assigned round-robin (balanced up
/// to rounding) and the sample order is shuffled.
pub fn gen_synthetic(
    n: usize,
    classes: usize,
    dim: usize,
    separation: f64,
    seed_value: u64,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::param(format!("need at least 2 classes, got {classes}")));
    }
    if dim == 0 {
        return Err(Error::param("feature dimension must be at least 1"));
    }
    if n < classes {
        return Err(Error::param(format!("n = {n} is smaller than the class count {classes}")));
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(Error::param(format!("separation {separation} must be finite and >= 0")));
    }

    let mut rng = seed::derived_rng(seed_value, seed::stream::DATASET, 0);
    let radius = separation / std::f64::consts::SQRT_2;
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|k| {
            if dim >= classes {
                let mut m = vec![0.0; dim];
                m[k] = radius;
                m
            } else {
                let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                dir.into_iter().map(|v| v / norm * radius).collect()
            }
        })
        .collect();

    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    labels.shuffle(&mut rng);
    let samples = labels
        .into_iter()
        .map(|label| {
            let features = means[label]
                .iter()
                .map(|m| m + rng.sample::<f64, _>(StandardNormal))
                .collect();
            LabeledSample { features, label }
        })
        .collect();
    Dataset::new(samples, classes)
}

impl SyntheticConfig {
    pub fn generate(&self, seed_value: u64) -> Result<Dataset> {
        gen_synthetic(self.n, self.classes, self.dim, self.separation, seed_value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = gen_synthetic(50, 3, 4, 2.0, 11).unwrap();
        let b = gen_synthetic(50, 3, 4, 2.0, 11).unwrap();
        let c = gen_synthetic(50, 3, 4, 2.0, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn balanced_labels() {
        let ds = gen_synthetic(103, 10, 32, 3.0, 1).unwrap();
        let mut counts = [0usize; 10];
        ds.samples().iter().for_each(|s| counts[s.label] += 1);
        assert!(counts.iter().all(|&c| c == 10 || c == 11));
        assert_eq!(ds.dim(), 32);
    }

    #[test]
    fn means_are_separated() {
        // Class means estimated from 4000 samples should be ~separation apart.
        let ds = gen_synthetic(4000, 2, 3, 4.0, 5).unwrap();
        let mut sums = [[0.0; 3]; 2];
        let mut counts = [0.0; 2];
        for s in ds.samples() {
            counts[s.label] += 1.0;
            for d in 0..3 {
                sums[s.label][d] += s.features[d];
            }
        }
        let dist: f64 = (0..3)
            .map(|d| (sums[0][d] / counts[0] - sums[1][d] / counts[1]).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((dist - 4.0).abs() < 0.15, "distance {dist}");
    }

    #[test]
    fn parameter_errors() {
        assert!(gen_synthetic(10, 1, 2, 1.0, 0).is_err());
        assert!(gen_synthetic(10, 2, 0, 1.0, 0).is_err());
        assert!(gen_synthetic(1, 2, 2, 1.0, 0).is_err());
        assert!(gen_synthetic(10, 2, 2, -1.0, 0).is_err());
    }
}
