//! Unsupervised encoder training and supervised head fine-tuning.

use std::borrow::Cow;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::nt_xent;
use super::model::{AttackModel, DEFAULT_THRESHOLD};
use super::views::{attack_data_from_clean, ViewPair};
use crate::error::{Error, Result};
use crate::features::{build_feature, Standardizer};
use crate::nn::{Activation, GradReduction, Gradients, Network, NetworkSpec, Sgd};
use crate::seed::{self, stream};
use crate::target::{build_shadows, fit_classifier, ClassifierTraining, ShadowPair, TargetModel, ViewMode};

/// Attack-model layer widths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackArch {
    /// Encoder widths after the `C + 2` input; every layer is ReLU.
    pub encoder_hidden: Vec<usize>,
    pub projection_dim: usize,
    /// Hidden widths of the classification head (empty = single linear layer).
    pub head_hidden: Vec<usize>,
}

impl Default for AttackArch {
    fn default() -> Self {
        AttackArch {
            encoder_hidden: vec![128, 64],
            projection_dim: 32,
            head_hidden: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveConfig {
    pub temperature: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub d1: f64,
    pub d2: f64,
    pub view_mode: ViewMode,
    /// Recompute max/entropy on each dropped-out view.
    pub features_after_dropout: bool,
    /// Z-score the feature vectors (fitted on the clean target-set features).
    pub normalize_features: bool,
    /// Average the loss over both anchors of every pair.
    pub symmetric_loss: bool,
    /// Draw fresh dropout views every epoch instead of fixing `D_a` once.
    pub resample_views: bool,
    pub reduction: GradReduction,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        ContrastiveConfig {
            temperature: 0.05,
            batch_size: 64,
            epochs: 50,
            learning_rate: 0.01,
            d1: 0.1,
            d2: 0.1,
            view_mode: ViewMode::PosteriorDropout,
            features_after_dropout: false,
            normalize_features: false,
            symmetric_loss: true,
            resample_views: false,
            reduction: GradReduction::Mean,
            momentum: 0.0,
            seed: 0,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::param(format!("temperature {} must be positive", self.temperature)));
        }
        if self.batch_size < 2 {
            return Err(Error::param("contrastive batch size must be at least 2"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::param("learning rate must be finite and >= 0"));
        }
        crate::nn::check_rate(self.d1)?;
        crate::nn::check_rate(self.d2)
    }

    /// Seed of the dropout masks that build the attack set.
    pub fn view_seed(&self) -> u64 {
        seed::derive(self.seed, stream::CONTRASTIVE, 0)
    }

    /// View generators implied by this configuration.
    pub fn shadows(&self, target: TargetModel) -> Result<ShadowPair> {
        build_shadows(target, self.d1, self.d2, self.view_mode)
    }
}

fn encoder_spec(input: usize, arch: &AttackArch, seed_value: u64) -> NetworkSpec {
    let mut sizes = vec![input];
    sizes.extend(&arch.encoder_hidden);
    NetworkSpec::mlp(&sizes, Activation::Relu, seed_value).with_output_activation(Activation::Relu)
}

/// Contrastive training of the encoder and projection head on the unlabeled
/// target set. Only raw inputs are accepted here; membership never reaches
/// this function.
pub fn train_encoder(
    inputs: &[Vec<f64>],
    shadows: &ShadowPair,
    arch: &AttackArch,
    cfg: &ContrastiveConfig,
) -> Result<AttackModel> {
    cfg.validate()?;
    let clean: Vec<Vec<f64>> = inputs
        .iter()
        .map(|x| shadows.base.posterior(x))
        .collect::<Result<_>>()?;
    let standardizer = if cfg.normalize_features {
        let rows: Vec<Vec<f64>> = clean
            .iter()
            .map(|p| build_feature(p).map(|f| f.into_inner()))
            .collect::<Result<_>>()?;
        Some(Standardizer::fit(&rows)?)
    } else {
        None
    };
    let view_seed = cfg.view_seed();
    let fixed = if cfg.resample_views {
        Vec::new()
    } else {
        attack_data_from_clean(inputs, &clean, shadows, cfg.features_after_dropout, view_seed, 0)?
    };
    contrastive_loop(
        inputs.len(),
        |epoch| {
            if cfg.resample_views {
                attack_data_from_clean(
                    inputs,
                    &clean,
                    shadows,
                    cfg.features_after_dropout,
                    view_seed,
                    epoch as u64,
                )
                .map(Cow::Owned)
            } else {
                Ok(Cow::Borrowed(&fixed[..]))
            }
        },
        shadows.n_classes(),
        standardizer,
        arch,
        cfg,
    )
}

/// Contrastive training on a fixed, precomputed attack set (e.g. read back
/// from an attack-data dump). `resample_views` is ignored.
pub fn train_encoder_on_pairs(
    pairs: &[ViewPair],
    n_classes: usize,
    standardizer: Option<Standardizer>,
    arch: &AttackArch,
    cfg: &ContrastiveConfig,
) -> Result<AttackModel> {
    cfg.validate()?;
    if let Some(p) = pairs.iter().find(|p| p.i.len() != n_classes + 2 || p.j.len() != n_classes + 2) {
        return Err(Error::shape("attack view", n_classes + 2, p.i.len().max(p.j.len())));
    }
    contrastive_loop(
        pairs.len(),
        |_| Ok(Cow::Borrowed(pairs)),
        n_classes,
        standardizer,
        arch,
        cfg,
    )
}

fn contrastive_loop<'a>(
    n: usize,
    mut views_for_epoch: impl FnMut(usize) -> Result<Cow<'a, [ViewPair]>>,
    n_classes: usize,
    standardizer: Option<Standardizer>,
    arch: &AttackArch,
    cfg: &ContrastiveConfig,
) -> Result<AttackModel> {
    if n < cfg.batch_size {
        return Err(Error::Data(format!(
            "target set has {n} samples, fewer than the batch size {}",
            cfg.batch_size
        )));
    }
    if arch.encoder_hidden.is_empty() {
        return Err(Error::param("the encoder needs at least one layer"));
    }
    let feature_dim = n_classes + 2;

    let mut encoder = Network::new(encoder_spec(
        feature_dim,
        arch,
        seed::derive(cfg.seed, stream::ENCODER_INIT, 0),
    ))?;
    let embed_dim = encoder.output_dim();
    let mut projection = Network::new(NetworkSpec::mlp(
        &[embed_dim, arch.projection_dim],
        Activation::Relu,
        seed::derive(cfg.seed, stream::ENCODER_INIT, 1),
    ))?;
    let mut enc_opt = Sgd::new(cfg.learning_rate).with_momentum(cfg.momentum);
    let mut proj_opt = Sgd::new(cfg.learning_rate).with_momentum(cfg.momentum);

    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let pairs = views_for_epoch(epoch)?;
        order.shuffle(&mut seed::derived_rng(cfg.seed, stream::ENCODER_SHUFFLE, epoch as u64));

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size).filter(|b| b.len() >= 2) {
            let views: Vec<Vec<f64>> = batch
                .iter()
                .flat_map(|&k| [&pairs[k].i, &pairs[k].j])
                .map(|v| match &standardizer {
                    Some(s) => s.apply(v),
                    None => v.clone(),
                })
                .collect();
            let forward: Vec<_> = views
                .par_iter()
                .map(|x| {
                    let (h, et) = encoder.forward(x, true, None)?;
                    let (z, pt) = projection.forward(&h, true, None)?;
                    Ok((z, et, pt))
                })
                .collect::<Result<_>>()?;
            let z: Vec<Vec<f64>> = forward.iter().map(|(z, _, _)| z.clone()).collect();
            let out = nt_xent(&z, cfg.temperature, cfg.symmetric_loss).map_err(|e| Error::Training {
                epoch,
                reason: e.to_string(),
            })?;
            if !out.loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    reason: "non-finite NT-Xent loss".into(),
                });
            }
            let scale = match cfg.reduction {
                GradReduction::Mean => 1.0,
                GradReduction::Sum => out.per_anchor.len() as f64,
            };
            let per_view: Vec<(Gradients, Gradients)> = out
                .grads
                .par_iter()
                .zip(forward.par_iter())
                .map(|(gz, (_, et, pt))| {
                    let (pg, dh) = projection.backward_with_input(pt, gz)?;
                    Ok((encoder.backward(et, &dh)?, pg))
                })
                .collect::<Result<_>>()?;
            let mut enc_grads = Gradients::zeros_like(&encoder);
            let mut proj_grads = Gradients::zeros_like(&projection);
            for (eg, pg) in &per_view {
                enc_grads.add_assign(eg);
                proj_grads.add_assign(pg);
            }
            enc_grads.scale(scale);
            proj_grads.scale(scale);
            let diverged = |e: Error| Error::Training {
                epoch,
                reason: e.to_string(),
            };
            enc_opt.step(&mut encoder, &enc_grads).map_err(diverged)?;
            proj_opt.step(&mut projection, &proj_grads).map_err(diverged)?;
            epoch_loss += out.loss;
            batches += 1;
        }
        let mean = epoch_loss / batches.max(1) as f64;
        log::debug!("contrastive epoch {epoch}: NT-Xent {mean:.6}");
        history.push(mean);
    }

    Ok(AttackModel {
        n_classes,
        encoder: Some(encoder),
        projection: Some(projection),
        head: None,
        standardizer,
        encoder_frozen: false,
        threshold: DEFAULT_THRESHOLD,
        contrastive_history: history,
        finetune_history: Vec::new(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub reduction: GradReduction,
    pub momentum: f64,
    /// Start the head from all-zero parameters instead of Glorot init.
    pub zero_init_head: bool,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            epochs: 100,
            learning_rate: 0.01,
            batch_size: 32,
            reduction: GradReduction::Mean,
            momentum: 0.0,
            zero_init_head: false,
            seed: 0,
        }
    }
}

/// Supervised fine-tuning: the encoder is frozen, the projection head is
/// discarded and only the classification head learns, by cross-entropy on
/// `(posterior, member)` pairs from the labeled set.
pub fn finetune(
    mut model: AttackModel,
    labeled: &[(Vec<f64>, bool)],
    arch: &AttackArch,
    cfg: &FinetuneConfig,
) -> Result<AttackModel> {
    if labeled.is_empty() {
        return Err(Error::Data("empty labeled set".into()));
    }
    let members = labeled.iter().filter(|(_, m)| *m).count();
    if members == 0 || members == labeled.len() {
        return Err(Error::Data(
            "labeled set must contain both members and non-members".into(),
        ));
    }
    model.projection = None;
    model.encoder_frozen = true;

    let embeddings: Vec<Vec<f64>> = labeled
        .iter()
        .map(|(p, _)| build_feature(p).and_then(|f| model.embed(f.values())))
        .collect::<Result<_>>()?;
    let labels: Vec<usize> = labeled.iter().map(|(_, m)| usize::from(*m)).collect();

    let mut head = match model.head.take() {
        Some(h) => h,
        None => {
            let mut sizes = vec![model.embedding_dim()];
            sizes.extend(&arch.head_hidden);
            sizes.push(2);
            let mut h = Network::new(NetworkSpec::mlp(
                &sizes,
                Activation::Relu,
                seed::derive(cfg.seed, stream::HEAD_INIT, 0),
            ))?;
            if cfg.zero_init_head {
                h.zero_parameters();
            }
            h
        }
    };
    let training = ClassifierTraining {
        epochs: cfg.epochs,
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        reduction: cfg.reduction,
        momentum: cfg.momentum,
    };
    let history = fit_classifier(
        &mut head,
        &embeddings,
        &labels,
        &training,
        stream::HEAD_SHUFFLE,
        cfg.seed,
    )?;
    model.head = Some(head);
    model.finetune_history.extend(history);
    Ok(model)
}

/// Fraction of the labeled set the fine-tuned model classifies correctly.
pub fn head_accuracy(model: &AttackModel, labeled: &[(Vec<f64>, bool)]) -> Result<f64> {
    let mut correct = 0usize;
    for (p, m) in labeled {
        if model.infer_membership(p)?.member == *m {
            correct += 1;
        }
    }
    Ok(correct as f64 / labeled.len().max(1) as f64)
}

pub fn view_mode_name(mode: ViewMode) -> &'static str {
    match mode {
        ViewMode::PosteriorDropout => "posterior_dropout",
        ViewMode::NetworkDropout => "network_dropout",
    }
}
