//! The contrastive attack assembled from library pieces: dropout views of the
//! target's posteriors, unsupervised encoder training on D_t, head fine-tuning
//! on the small labeled set D_l, then inference and metrics on D_t.
//!
//! cargo run --release --example clmia_attack

use std::sync::Arc;

use clmia::clmia::{finetune, train_encoder, AttackArch, ContrastiveConfig, FinetuneConfig};
use clmia::data::{gen_synthetic, split_membership, SplitConfig};
use clmia::metrics::{balanced_accuracy, roc};
use clmia::nn::{Activation, NetworkSpec};
use clmia::target::{build_shadows, train_target, ClassifierTraining, TargetModel, ViewMode};

fn main() -> clmia::Result<()> {
    let seed = 5;
    let data = gen_synthetic(1600, 10, 32, 3.0, seed)?;
    let split = split_membership(data.samples(), &SplitConfig::default(), seed)?;
    let spec = NetworkSpec::mlp(&[32, 128, 128, 10], Activation::Relu, seed);
    let (net, profile) = train_target(&split.train_members, &split.non_members, spec, &ClassifierTraining::default())?;
    println!("target gap {:.3}", profile.gap());
    let target = TargetModel::Network(Arc::new(net));

    let cfg = ContrastiveConfig { seed, ..ContrastiveConfig::default() };
    let shadows = build_shadows(target.clone(), cfg.d1, cfg.d2, ViewMode::PosteriorDropout)?;
    let arch = AttackArch::default();
    // Only inputs reach the encoder; membership bits stay in split.target.membership.
    let inputs = split.target.inputs();
    let encoder = train_encoder(&inputs, &shadows, &arch, &cfg)?;
    let h = &encoder.contrastive_history;
    println!("contrastive loss {:.4} -> {:.4}", h[0], h[h.len() - 1]);

    let labeled = split
        .labeled
        .iter()
        .map(|(s, m)| Ok((target.posterior(&s.features)?, *m)))
        .collect::<clmia::Result<Vec<_>>>()?;
    let model = finetune(encoder, &labeled, &arch, &FinetuneConfig { seed, ..FinetuneConfig::default() })?;

    let posteriors = inputs.iter().map(|x| target.posterior(x)).collect::<clmia::Result<Vec<_>>>()?;
    let decisions = model.infer_all(&posteriors)?;
    let member: Vec<bool> = decisions.iter().map(|d| d.member).collect();
    let scores: Vec<f64> = decisions.iter().map(|d| d.score).collect();
    let truth = &split.target.membership;
    println!(
        "balanced accuracy {:.4}, AUC {:.4}",
        balanced_accuracy(&member, truth)?,
        roc(&scores, truth)?.auc
    );
    Ok(())
}
