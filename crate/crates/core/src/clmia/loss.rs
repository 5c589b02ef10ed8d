//! Cosine similarity and the NT-Xent contrastive loss with its analytic
//! gradient.

use crate::error::{Error, Result};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `a . b / (|a| |b|)`, clamped to `[-1, 1]`. Zero vectors are a domain error.
pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("cosine operands", a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::Domain("cosine similarity of empty vectors".into()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("cosine similarity with a zero vector".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug)]
pub struct NtXent {
    /// Mean of `per_anchor`.
    pub loss: f64,
    /// Loss of each anchor, in anchor order.
    pub per_anchor: Vec<f64>,
    /// Gradient of `loss` with respect to each input embedding.
    pub grads: Vec<Vec<f64>>,
}

/// NT-Xent over `2N` embeddings laid out as pairs `(z[2m], z[2m+1])`.
///
/// Each anchor's partner is its positive and the other `2N - 2` embeddings
/// are negatives:
///
/// ```text
/// l(a) = -ln( exp(sim(a, partner)/tau) / sum_{k != a} exp(sim(a, k)/tau) )
/// ```
///
/// With `symmetric` every embedding anchors once (both orders of each pair);
/// otherwise only the first view of each pair anchors.
pub fn nt_xent(embeddings: &[Vec<f64>], tau: f64, symmetric: bool) -> Result<NtXent> {
    let n2 = embeddings.len();
    if n2 == 0 {
        return Err(Error::param("NT-Xent needs at least one pair"));
    }
    if !n2.is_multiple_of(2) {
        return Err(Error::param(format!("NT-Xent needs an even number of embeddings, got {n2}")));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::param(format!("temperature {tau} must be positive")));
    }
    let dim = embeddings[0].len();
    let mut unit = Vec::with_capacity(n2);
    let mut norms = Vec::with_capacity(n2);
    for z in embeddings {
        if z.len() != dim {
            return Err(Error::shape("embedding", dim, z.len()));
        }
        let n = norm(z);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Domain("zero or non-finite embedding in NT-Xent".into()));
        }
        norms.push(n);
        unit.push(z.iter().map(|v| v / n).collect::<Vec<f64>>());
    }

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut sim = vec![0.0; n2 * n2];
    for a in 0..n2 {
        for k in a..n2 {
            let s = dot(&unit[a], &unit[k]).clamp(-1.0, 1.0);
            sim[a * n2 + k] = s;
            sim[k * n2 + a] = s;
        }
    }

    let anchors: Vec<usize> = if symmetric {
        (0..n2).collect()
    } else {
        (0..n2).step_by(2).collect()
    };
    let weight = 1.0 / anchors.len() as f64;

    let mut per_anchor = Vec::with_capacity(anchors.len());
    // dL/dunit
    let mut gunit = vec![vec![0.0; dim]; n2];
    let mut logits = vec![0.0; n2];
    for &a in &anchors {
        let partner = a ^ 1;
        let mut top = partner;
        for k in 0..n2 {
            if k != a {
                logits[k] = sim[a * n2 + k] / tau;
                if logits[k] > logits[top] {
                    top = k;
                }
            }
        }
        let max = logits[top];
        // ln_1p keeps precision when one term dominates the denominator.
        let rest: f64 = (0..n2)
            .filter(|&k| k != a && k != top)
            .map(|k| (logits[k] - max).exp())
            .sum();
        let denom = 1.0 + rest;
        per_anchor.push((max - logits[partner]) + rest.ln_1p());

        for k in 0..n2 {
            if k == a {
                continue;
            }
            let softmax = (logits[k] - max).exp() / denom;
            let indicator = if k == partner { 1.0 } else { 0.0 };
            let g = weight * (softmax - indicator) / tau;
            if g == 0.0 {
                continue;
            }
            // d sim(a,k) / d unit_a = unit_k and vice versa.
            for d in 0..dim {
                gunit[a][d] += g * unit[k][d];
                gunit[k][d] += g * unit[a][d];
            }
        }
    }

    let grads = gunit
        .iter()
        .zip(unit.iter().zip(&norms))
        .map(|(g, (u, n))| {
            let radial = dot(g, u);
            g.iter().zip(u).map(|(gi, ui)| (gi - radial * ui) / n).collect()
        })
        .collect();

    let loss = per_anchor.iter().sum::<f64>() * weight;
    Ok(NtXent {
        loss,
        per_anchor,
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_fixtures() {
        assert!((cosine_sim(&[3.0, 4.0], &[3.0, 4.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        // 32 / (sqrt(14) sqrt(77))
        let v = cosine_sim(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((v - 0.974_631_846_197_076_2).abs() < 1e-12);
        assert!(matches!(cosine_sim(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn cosine_scale_invariant() {
        let z = [0.3, -1.2, 2.2];
        let w = [1.5, 0.1, -0.7];
        let s = cosine_sim(&z, &w).unwrap();
        let z2: Vec<f64> = z.iter().map(|v| 2.0 * v).collect();
        let w3: Vec<f64> = w.iter().map(|v| 3.0 * v).collect();
        assert!((cosine_sim(&z2, &w3).unwrap() - s).abs() < 1e-12);
        assert_eq!(cosine_sim(&w, &z).unwrap(), s);
    }

    #[test]
    fn single_pair_has_zero_loss() {
        let r = nt_xent(&[vec![1.0, 2.0], vec![-3.0, 0.5]], 0.5, true).unwrap();
        assert_eq!(r.loss, 0.0);
        assert!(r.grads.iter().flatten().all(|g| *g == 0.0));
    }

    #[test]
    fn two_pair_hand_case() {
        let z = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]];
        let r = nt_xent(&z, 1.0, true).unwrap();
        // -ln(e / (e + 2))
        let expected = 0.551_444_713_932_051_1;
        for l in &r.per_anchor {
            assert!((l - expected).abs() < 1e-12);
        }
        assert!((r.loss - expected).abs() < 1e-12);
    }

    #[test]
    fn parameter_errors() {
        assert!(nt_xent(&[], 0.1, true).is_err());
        assert!(nt_xent(&[vec![1.0]], 0.1, true).is_err());
        assert!(nt_xent(&[vec![1.0], vec![1.0]], 0.0, true).is_err());
        assert!(nt_xent(&[vec![1.0], vec![0.0]], 0.1, true).is_err());
    }

    #[test]
    fn one_sided_uses_first_views() {
        let z = vec![vec![1.0, 0.2], vec![0.9, 0.1], vec![-0.3, 1.0], vec![0.0, 1.0]];
        let r = nt_xent(&z, 0.5, false).unwrap();
        assert_eq!(r.per_anchor.len(), 2);
        let full = nt_xent(&z, 0.5, true).unwrap();
        assert!((r.per_anchor[0] - full.per_anchor[0]).abs() < 1e-15);
        assert!((r.per_anchor[1] - full.per_anchor[2]).abs() < 1e-15);
    }
}
