//! Target classifier training and the two dropout view generators derived
//! from it.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{LabeledSample, PosteriorDump, PosteriorRow};
use crate::error::{Error, Result};
use crate::features::check_simplex;
use crate::nn::{self, dropout_apply, softmax, softmax_cross_entropy, GradReduction, Gradients, Network, NetworkSpec, Sgd};
use crate::seed;

/// Minibatch SGD settings for cross-entropy classifiers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierTraining {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    #[serde(default)]
    pub reduction: GradReduction,
    #[serde(default)]
    pub momentum: f64,
}

impl Default for ClassifierTraining {
    fn default() -> Self {
        ClassifierTraining {
            epochs: 200,
            learning_rate: 0.05,
            batch_size: 32,
            reduction: GradReduction::Mean,
            momentum: 0.0,
        }
    }
}

/// Cross-entropy training of `net` on `(inputs, labels)`. Returns the mean
/// loss per epoch. Deterministic given `seed_value`.
pub(crate) fn fit_classifier(
    net: &mut Network,
    inputs: &[Vec<f64>],
    labels: &[usize],
    cfg: &ClassifierTraining,
    shuffle_stream: u64,
    seed_value: u64,
) -> Result<Vec<f64>> {
    if inputs.len() != labels.len() {
        return Err(Error::shape("classifier labels", inputs.len(), labels.len()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::param("batch_size must be positive"));
    }
    let mut opt = Sgd::new(cfg.learning_rate).with_momentum(cfg.momentum);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = seed::derived_rng(seed_value, shuffle_stream, epoch as u64);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = Gradients::zeros_like(net);
            for &i in batch {
                let (logits, tape) = net.forward(&inputs[i], true, Some(&mut rng))?;
                let (_, loss, dlogits) = softmax_cross_entropy(&logits, labels[i])?;
                if !loss.is_finite() {
                    return Err(Error::Training {
                        epoch,
                        reason: "non-finite cross-entropy".into(),
                    });
                }
                epoch_loss += loss;
                grads.add_assign(&net.backward(&tape, &dlogits)?);
            }
            grads.scale(cfg.reduction.factor(batch.len()));
            opt.step(net, &grads).map_err(|e| Error::Training {
                epoch,
                reason: e.to_string(),
            })?;
        }
        let mean = epoch_loss / inputs.len().max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::Training {
                epoch,
                reason: "non-finite mean loss".into(),
            });
        }
        log::debug!("classifier epoch {epoch}: loss {mean:.6}");
        history.push(mean);
    }
    Ok(history)
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    // First maximal index wins ties.
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(net: &Network, samples: &[LabeledSample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let correct = samples
        .iter()
        .map(|s| net.predict(&s.features).map(|o| argmax(&o) == s.label))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|c| *c)
        .count();
    Ok(correct as f64 / samples.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetProfile {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub epochs: usize,
    pub final_train_loss: f64,
    pub loss_history: Vec<f64>,
}

impl TargetProfile {
    pub fn gap(&self) -> f64 {
        self.train_accuracy - self.test_accuracy
    }
}

/// Train the target classifier on `train`; `test` only feeds the profile.
pub fn train_target(
    train: &[LabeledSample],
    test: &[LabeledSample],
    spec: NetworkSpec,
    cfg: &ClassifierTraining,
) -> Result<(Network, TargetProfile)> {
    if train.is_empty() {
        return Err(Error::Data("empty target training set".into()));
    }
    let classes = spec.output_dim();
    if let Some(s) = train.iter().find(|s| s.label >= classes) {
        return Err(Error::Data(format!(
            "label {} does not fit a {classes}-way output layer",
            s.label
        )));
    }
    let seed_value = spec.seed;
    let mut net = Network::new(spec)?;
    let inputs: Vec<Vec<f64>> = train.iter().map(|s| s.features.clone()).collect();
    let labels: Vec<usize> = train.iter().map(|s| s.label).collect();
    let history = fit_classifier(
        &mut net,
        &inputs,
        &labels,
        cfg,
        seed::stream::TARGET_SHUFFLE,
        seed_value,
    )?;

    let final_train_loss = match history.last() {
        Some(l) => *l,
        None => {
            let mut total = 0.0;
            for (x, y) in inputs.iter().zip(&labels) {
                total += softmax_cross_entropy(&net.predict(x)?, *y)?.1;
            }
            total / inputs.len() as f64
        }
    };
    let profile = TargetProfile {
        train_accuracy: accuracy(&net, train)?,
        test_accuracy: accuracy(&net, test)?,
        epochs: cfg.epochs,
        final_train_loss,
        loss_history: history,
    };
    Ok((net, profile))
}

/// The model under attack, seen only through its posteriors.
#[derive(Clone, Debug)]
pub enum TargetModel {
    /// A network trained in-process; posteriors are `softmax(net(x))`.
    Network(Arc<Network>),
    /// An external model: each input already *is* its posterior.
    Precomputed { n_classes: usize },
}

impl TargetModel {
    pub fn n_classes(&self) -> usize {
        match self {
            TargetModel::Network(n) => n.output_dim(),
            TargetModel::Precomputed { n_classes } => *n_classes,
        }
    }

    pub fn network(&self) -> Option<&Arc<Network>> {
        match self {
            TargetModel::Network(n) => Some(n),
            TargetModel::Precomputed { .. } => None,
        }
    }

    pub fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            TargetModel::Network(net) => Ok(softmax(&net.predict(x)?)),
            TargetModel::Precomputed { n_classes } => {
                if x.len() != *n_classes {
                    return Err(Error::shape("posterior", *n_classes, x.len()));
                }
                check_simplex(x)?;
                Ok(x.to_vec())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewMode {
    /// Dropout on the final posterior vector (black-box realizable).
    #[default]
    PosteriorDropout,
    /// Dropout on every hidden activation of the target network.
    NetworkDropout,
}

/// Two view generators `S_1^{+d_1}`, `S_2^{+d_2}` sharing the target's weights.
#[derive(Clone, Debug)]
pub struct ShadowPair {
    pub base: TargetModel,
    pub rates: [f64; 2],
    pub view_mode: ViewMode,
}

pub fn build_shadows(target: TargetModel, d1: f64, d2: f64, view_mode: ViewMode) -> Result<ShadowPair> {
    nn::check_rate(d1)?;
    nn::check_rate(d2)?;
    if view_mode == ViewMode::NetworkDropout && target.network().is_none() {
        return Err(Error::param(
            "network_dropout views need the target network; posterior dumps only support posterior_dropout",
        ));
    }
    Ok(ShadowPair {
        base: target,
        rates: [d1, d2],
        view_mode,
    })
}

impl ShadowPair {
    pub fn n_classes(&self) -> usize {
        self.base.n_classes()
    }

    /// Output of shadow `which` (0 or 1) on input `x`.
    ///
    /// In network mode the result is a posterior; in posterior mode it is the
    /// dropped-out (rescaled) posterior and is generally off the simplex.
    pub fn output<R: rand::RngCore>(&self, which: usize, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let rate = self.rates[which];
        match self.view_mode {
            ViewMode::PosteriorDropout => dropout_apply(&self.base.posterior(x)?, rate, rng),
            ViewMode::NetworkDropout => {
                let net = self.base.network().expect("checked in build_shadows");
                let rates = vec![rate; net.spec().hidden_layers()];
                let (logits, _) = net.forward_with_rates(x, &rates, Some(rng))?;
                Ok(softmax(&logits))
            }
        }
    }
}

/// Posteriors of the target for every sample, in order, computed in parallel.
pub fn posteriors(
    model: &TargetModel,
    samples: &[LabeledSample],
    membership: Option<&[bool]>,
) -> Result<PosteriorDump> {
    if let Some(bits) = membership {
        if bits.len() != samples.len() {
            return Err(Error::shape("membership bits", samples.len(), bits.len()));
        }
    }
    let rows = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(PosteriorRow {
                probs: model.posterior(&s.features)?,
                label: s.label,
                member: membership.map(|b| b[i]),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorDump {
        n_classes: model.n_classes(),
        labeled: membership.is_some(),
        rows,
    })
}

/// Posteriors of one shadow. Sample `i` draws its masks from a generator
/// seeded by `(seed_value, which, i)`, so parallel and serial runs agree.
///
/// Only network-dropout shadows (or a zero rate) produce simplex rows;
/// posterior-dropout outputs are views, not posteriors, and are rejected here.
pub fn shadow_posteriors(
    pair: &ShadowPair,
    which: usize,
    samples: &[LabeledSample],
    seed_value: u64,
) -> Result<PosteriorDump> {
    if pair.view_mode == ViewMode::PosteriorDropout && pair.rates[which] > 0.0 {
        return Err(Error::param(
            "posterior_dropout shadow outputs are rescaled views, not posteriors",
        ));
    }
    let rows = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = seed::derived_rng(seed_value, seed::stream::VIEWS + which as u64, i as u64);
            Ok(PosteriorRow {
                probs: pair.output(which, &s.features, &mut rng)?,
                label: s.label,
                member: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorDump {
        n_classes: pair.n_classes(),
        labeled: false,
        rows,
    })
}
