//! Positive-pair construction from the two dropout view generators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureDump;
use crate::error::{Error, Result};
use crate::features::{build_feature_unchecked, concat_with_stats};
use crate::nn::dropout_apply;
use crate::seed::{self, derive, stream};
use crate::target::{ShadowPair, ViewMode};

/// Two augmented feature vectors of one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewPair {
    pub i: Vec<f64>,
    pub j: Vec<f64>,
}

/// Generator for the masks of sample `index` in epoch `epoch`.
pub fn view_rng(seed_value: u64, epoch: u64, index: u64) -> seed::Rng {
    seed::rng(derive(derive(seed_value, stream::VIEWS, epoch), 0, index))
}

/// Builds the two views of `x`.
///
/// By default each view is the shadow output followed by `max` and entropy of
/// the clean posterior, i.e. a dropout-augmented copy of the sample's feature
/// vector. With `features_after_dropout` the statistics are recomputed on the
/// shadow output instead.
pub fn make_views<R: rand::RngCore>(
    x: &[f64],
    shadows: &ShadowPair,
    features_after_dropout: bool,
    rng: &mut R,
) -> Result<ViewPair> {
    let clean = shadows.base.posterior(x)?;
    views_from_clean(x, &clean, shadows, features_after_dropout, rng)
}

pub(crate) fn views_from_clean<R: rand::RngCore>(
    x: &[f64],
    clean: &[f64],
    shadows: &ShadowPair,
    features_after_dropout: bool,
    rng: &mut R,
) -> Result<ViewPair> {
    let mut view = |which: usize| -> Result<Vec<f64>> {
        let out = match shadows.view_mode {
            ViewMode::PosteriorDropout => dropout_apply(clean, shadows.rates[which], rng)?,
            ViewMode::NetworkDropout => shadows.output(which, x, rng)?,
        };
        Ok(if features_after_dropout {
            build_feature_unchecked(&out).into_inner()
        } else {
            concat_with_stats(&out, clean)
        })
    };
    let i = view(0)?;
    let j = view(1)?;
    if i.iter().chain(&j).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite view".into()));
    }
    Ok(ViewPair { i, j })
}

/// The attack training set `D_a`: one view pair per input, in input order.
/// Sample `k` uses [`view_rng`]`(seed, epoch, k)`, so the result does not
/// depend on thread scheduling.
pub fn make_attack_data(
    inputs: &[Vec<f64>],
    shadows: &ShadowPair,
    features_after_dropout: bool,
    seed_value: u64,
    epoch: u64,
) -> Result<Vec<ViewPair>> {
    inputs
        .par_iter()
        .enumerate()
        .map(|(k, x)| {
            let mut rng = view_rng(seed_value, epoch, k as u64);
            make_views(x, shadows, features_after_dropout, &mut rng)
        })
        .collect()
}

pub(crate) fn attack_data_from_clean(
    inputs: &[Vec<f64>],
    clean: &[Vec<f64>],
    shadows: &ShadowPair,
    features_after_dropout: bool,
    seed_value: u64,
    epoch: u64,
) -> Result<Vec<ViewPair>> {
    inputs
        .par_iter()
        .zip(clean.par_iter())
        .enumerate()
        .map(|(k, (x, p))| {
            let mut rng = view_rng(seed_value, epoch, k as u64);
            views_from_clean(x, p, shadows, features_after_dropout, &mut rng)
        })
        .collect()
}

/// Flattens view pairs into a feature dump (view i, then view j, per sample).
pub fn attack_data_dump(pairs: &[ViewPair]) -> FeatureDump {
    let dim = pairs.first().map_or(0, |p| p.i.len());
    FeatureDump {
        dim,
        rows: pairs
            .iter()
            .flat_map(|p| [p.i.clone(), p.j.clone()])
            .collect(),
    }
}

/// Inverse of [`attack_data_dump`].
pub fn attack_data_from_dump(dump: &FeatureDump) -> Result<Vec<ViewPair>> {
    if !dump.rows.len().is_multiple_of(2) {
        return Err(Error::Data("attack data dump has an odd number of rows".into()));
    }
    Ok(dump
        .rows
        .chunks_exact(2)
        .map(|c| ViewPair {
            i: c[0].clone(),
            j: c[1].clone(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::{build_shadows, TargetModel};

    fn posterior_shadows(d: f64) -> ShadowPair {
        build_shadows(TargetModel::Precomputed { n_classes: 4 }, d, d, ViewMode::PosteriorDropout)
            .unwrap()
    }

    #[test]
    fn zero_rates_give_identical_views() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let v = make_views(&p, &posterior_shadows(0.0), false, &mut view_rng(1, 0, 0)).unwrap();
        assert_eq!(v.i, v.j);
        assert_eq!(v.i.len(), 6);
    }

    #[test]
    fn stats_come_from_clean_posterior_by_default() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let shadows = posterior_shadows(0.5);
        let v = make_views(&p, &shadows, false, &mut view_rng(1, 0, 0)).unwrap();
        let clean = crate::features::build_feature(&p).unwrap().0;
        assert_eq!(&v.i[4..], &clean[4..]);
        let w = make_views(&p, &shadows, true, &mut view_rng(1, 0, 0)).unwrap();
        let recomputed = build_feature_unchecked(&w.i[..4]).0;
        assert_eq!(w.i, recomputed);
    }

    #[test]
    fn views_deterministic_per_seed_epoch_index() {
        let inputs: Vec<Vec<f64>> = (0..50).map(|k| {
            let a = (k as f64 + 1.0) / 60.0;
            vec![a, 1.0 - a - 0.0, 0.0, 0.0]
        }).collect();
        let shadows = posterior_shadows(0.5);
        let a = make_attack_data(&inputs, &shadows, false, 9, 3).unwrap();
        let b = make_attack_data(&inputs, &shadows, false, 9, 3).unwrap();
        let c = make_attack_data(&inputs, &shadows, false, 9, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), inputs.len());
        let serial: Vec<ViewPair> = inputs
            .iter()
            .enumerate()
            .map(|(k, x)| make_views(x, &shadows, false, &mut view_rng(9, 3, k as u64)).unwrap())
            .collect();
        assert_eq!(a, serial);
    }

    #[test]
    fn dump_round_trip_preserves_pairs() {
        let pairs = vec![
            ViewPair { i: vec![0.5, 0.5, 0.5, 0.75], j: vec![1.0, 0.0, 0.5, 0.75] },
        ];
        let dump = attack_data_dump(&pairs);
        assert_eq!(dump.rows.len(), 2);
        assert_eq!(attack_data_from_dump(&dump).unwrap(), pairs);
    }
}
