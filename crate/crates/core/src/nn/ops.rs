use rand::Rng;

use super::check_rate;
use crate::error::{Error, Result};

/// Inverted-dropout scale factors: each entry is 0 with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(vec![1.0; len]);
    }
    let keep = 1.0 / (1.0 - rate);
    Ok((0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect())
}

/// Inverted dropout on a vector. Rate 0 returns the input unchanged and
/// draws nothing from `rng`.
pub fn dropout_apply<R: Rng + ?Sized>(v: &[f64], rate: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(v.to_vec());
    }
    let mask = dropout_mask(v.len(), rate, rng)?;
    Ok(v.iter().zip(&mask).map(|(x, m)| x * m).collect())
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Softmax probabilities, cross-entropy loss `-ln p[label]` and its gradient
/// with respect to the logits, `p - onehot(label)`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    if logits.is_empty() {
        return Err(Error::param("softmax over empty logits"));
    }
    if label >= logits.len() {
        return Err(Error::param(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let probs = softmax(logits);
    let loss = (log_sum_exp(logits) - logits[label]).max(0.0);
    let mut grad = probs.clone();
    grad[label] -= 1.0;
    Ok((probs, loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;

    #[test]
    fn zero_rate_is_identity() {
        let v = [0.3, 1.5, -2.0];
        assert_eq!(dropout_apply(&v, 0.0, &mut rng(1)).unwrap(), v.to_vec());
    }

    #[test]
    fn masks_reproducible() {
        let v = vec![1.0; 64];
        let a = dropout_apply(&v, 0.5, &mut rng(7)).unwrap();
        let b = dropout_apply(&v, 0.5, &mut rng(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inverted_scaling_preserves_mean() {
        // Mean of 10k scaled Bernoulli(0.7) draws has sd ~ 0.0065; 0.02 is ~3 sd.
        let v = vec![1.0; 10_000];
        let out = dropout_apply(&v, 0.3, &mut rng(3)).unwrap();
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        assert!((0.98..=1.02).contains(&mean), "mean {mean}");
    }

    #[test]
    fn invalid_rates() {
        assert!(dropout_apply(&[1.0], 1.0, &mut rng(0)).is_err());
        assert!(dropout_apply(&[1.0], -0.1, &mut rng(0)).is_err());
    }

    #[test]
    fn uniform_logits() {
        let (p, loss, _) = softmax_cross_entropy(&[0.3; 4], 2).unwrap();
        for v in p {
            assert!((v - 0.25).abs() < 1e-15);
        }
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_logits_are_stable() {
        let (p, loss, grad) = softmax_cross_entropy(&[1000.0, 0.0], 0).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!(loss.abs() < 1e-12);
        assert!(grad.iter().all(|g| g.is_finite()));
        let (_, loss, _) = softmax_cross_entropy(&[1000.0, 0.0], 1).unwrap();
        assert!((loss - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng(12);
        for _ in 0..20 {
            let logits: Vec<f64> = (0..5).map(|_| r.random_range(-3.0..3.0)).collect();
            let label = r.random_range(0..5);
            let (_, _, grad) = softmax_cross_entropy(&logits, label).unwrap();
            for k in 0..5 {
                let h = 1e-6;
                let mut up = logits.clone();
                up[k] += h;
                let mut dn = logits.clone();
                dn[k] -= h;
                let fd = (softmax_cross_entropy(&up, label).unwrap().1
                    - softmax_cross_entropy(&dn, label).unwrap().1)
                    / (2.0 * h);
                let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-8);
                assert!(rel < 1e-5, "k={k} fd={fd} an={}", grad[k]);
            }
        }
    }

    #[test]
    fn empty_logits_rejected() {
        assert!(softmax_cross_entropy(&[], 0).is_err());
        assert!(softmax_cross_entropy(&[1.0], 1).is_err());
    }
}
