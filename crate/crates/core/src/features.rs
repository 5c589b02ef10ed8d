//! Attack feature vectors and the posterior statistics shared with the
//! threshold baselines.
//!
//! A feature vector is the posterior followed by its maximum and its Shannon
//! entropy (natural log): `[p_1, .., p_C, max(p), H(p)]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the simplex check on incoming posteriors.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

pub fn check_simplex(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Domain("empty posterior".into()));
    }
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Domain(format!("posterior entry {v} is negative or non-finite")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::Domain(format!("posterior sums to {sum}, not 1")));
    }
    Ok(())
}

/// `-sum p ln p` over any non-negative vector, with `0 ln 0 = 0`.
fn raw_entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

fn raw_max(p: &[f64]) -> f64 {
    p.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Shannon entropy of a posterior in nats.
pub fn entropy(p: &[f64]) -> Result<f64> {
    check_simplex(p)?;
    Ok(raw_entropy(p).max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn classes(&self) -> usize {
        self.0.len() - 2
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub fn build_feature(p: &[f64]) -> Result<FeatureVector> {
    check_simplex(p)?;
    Ok(build_feature_unchecked(p))
}

/// Same concatenation without the simplex check; used for dropped-out views
/// when statistics are recomputed after dropout.
pub fn build_feature_unchecked(p: &[f64]) -> FeatureVector {
    let mut v = Vec::with_capacity(p.len() + 2);
    v.extend_from_slice(p);
    v.push(raw_max(p));
    v.push(raw_entropy(p));
    FeatureVector(v)
}

/// Appends the statistics of `stats_source` to `posterior`.
pub(crate) fn concat_with_stats(posterior: &[f64], stats_source: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(posterior.len() + 2);
    v.extend_from_slice(posterior);
    v.push(raw_max(stats_source));
    v.push(raw_entropy(stats_source));
    v
}

/// Per-coordinate z-scoring, fitted on a reference set of feature vectors.
/// Off by default in the attack pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Data("cannot standardize an empty set".into()))?;
        let dim = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            if r.len() != dim {
                return Err(Error::shape("standardizer row", dim, r.len()));
            }
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            var.iter_mut()
                .zip(r.iter().zip(&mean))
                .for_each(|(s, (v, m))| *s += (v - m) * (v - m) / n);
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}
