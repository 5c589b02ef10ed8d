//! One function per CLI subcommand. Each reads its inputs from the output
//! directory (written by the earlier subcommands) and recomputes the cheap,
//! deterministic parts (data split, views) from the configuration.

use std::path::Path;

use super::config::ExperimentConfig;
use super::pipeline::{
    attack_outcome, baseline_outcomes, files, finetune_attack, inference_text, load_attack,
    load_target, prepare_data, save_network, split_posteriors, train_attack_encoder,
    train_target_model, write_reports, CLMIA,
};
use crate::clmia::{
    attack_data_dump, attack_data_from_dump, make_attack_data, save_attack_model,
    train_encoder_on_pairs,
};
use crate::data::{load_feature_dump, load_posterior_dump, write_feature_dump, write_posterior_dump};
use crate::error::{Error, Result};
use crate::metrics::AttackReport;
use crate::target::{shadow_posteriors, TargetProfile};

pub fn train_target_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<TargetProfile> {
    let data = prepare_data(cfg)?;
    if data.external {
        return Err(Error::Config("dump datasets have no target to train".into()));
    }
    let (net, profile) = train_target_model(cfg, &data)?;
    save_network(&net, &out.join(files::TARGET_CKPT))?;
    crate::io::write_json(&out.join(files::TARGET_PROFILE), &profile)?;
    Ok(profile)
}

/// Writes the `D_t` and `D_l` posterior dumps, or with `shadow = Some(k)` the
/// posteriors of shadow `k` (1 or 2) on `D_t`.
pub fn dump_posteriors_cmd(cfg: &ExperimentConfig, out: &Path, shadow: Option<usize>) -> Result<Vec<String>> {
    let data = prepare_data(cfg)?;
    let target = load_target(&data, out)?;
    match shadow {
        None => {
            let (eval, labeled) = split_posteriors(&target, &data)?;
            write_posterior_dump(&eval, out.join(files::POSTERIORS_TARGET))?;
            write_posterior_dump(&labeled, out.join(files::POSTERIORS_LABELED))?;
            Ok(vec![files::POSTERIORS_TARGET.into(), files::POSTERIORS_LABELED.into()])
        }
        Some(k @ (1 | 2)) => {
            let c = cfg.contrastive();
            let shadows = c.shadows(target)?;
            let dump = shadow_posteriors(&shadows, k - 1, &data.split.target.samples, c.view_seed())?;
            let name = format!("posteriors_shadow{k}.csv");
            write_posterior_dump(&dump, out.join(&name))?;
            Ok(vec![name])
        }
        Some(k) => Err(Error::param(format!("shadow must be 1 or 2, got {k}"))),
    }
}

pub fn make_attack_data_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<usize> {
    let data = prepare_data(cfg)?;
    let target = load_target(&data, out)?;
    let c = cfg.contrastive();
    let shadows = c.shadows(target)?;
    let pairs = make_attack_data(
        &data.split.target.inputs(),
        &shadows,
        c.features_after_dropout,
        c.view_seed(),
        0,
    )?;
    write_feature_dump(&attack_data_dump(&pairs), out.join(files::ATTACK_DATA))?;
    Ok(pairs.len())
}

/// Contrastive training. Without `attack_data` the views are regenerated
/// from the target exactly as `run` does; with it, training uses the given
/// attack-data file (e.g. built from an external model's posteriors).
pub fn train_clmia_cmd(cfg: &ExperimentConfig, out: &Path, attack_data: Option<&Path>) -> Result<Vec<f64>> {
    let model = match attack_data {
        None => {
            let data = prepare_data(cfg)?;
            let target = load_target(&data, out)?;
            train_attack_encoder(cfg, &target, &data)?
        }
        Some(path) => {
            if cfg.attack.normalize_features {
                return Err(Error::Config(
                    "normalize_features needs clean target posteriors; train without --attack-data".into(),
                ));
            }
            let dump = load_feature_dump(path)?;
            if dump.dim < 3 {
                return Err(Error::Data(format!("attack data dimension {} is too small", dump.dim)));
            }
            let pairs = attack_data_from_dump(&dump)?;
            train_encoder_on_pairs(&pairs, dump.dim - 2, None, &cfg.arch(), &cfg.contrastive())?
        }
    };
    save_attack_model(&model, &out.join(files::ENCODER_CKPT))?;
    Ok(model.contrastive_history)
}

pub fn finetune_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<f64>> {
    let encoder = load_attack(out, files::ENCODER_CKPT)?;
    let data = prepare_data(cfg)?;
    let (_, labeled) = split_posteriors(&load_target(&data, out)?, &data)?;
    let model = finetune_attack(cfg, encoder, &labeled)?;
    save_attack_model(&model, &out.join(files::ATTACK_CKPT))?;
    Ok(model.finetune_history)
}

/// Scores a posterior dump, by default the target set recomputed from the
/// saved target. Labeled dumps also produce a report.
pub fn infer_cmd(cfg: &ExperimentConfig, out: &Path, posteriors: Option<&Path>) -> Result<Option<AttackReport>> {
    let model = load_attack(out, files::ATTACK_CKPT)?;
    let dump = match posteriors {
        Some(path) => load_posterior_dump(path)?,
        None => {
            let data = prepare_data(cfg)?;
            split_posteriors(&load_target(&data, out)?, &data)?.0
        }
    };
    if dump.n_classes != model.n_classes {
        return Err(Error::shape("posterior dump classes", model.n_classes, dump.n_classes));
    }
    let outcome = attack_outcome(CLMIA, &model, &dump)?;
    let truth = dump.membership();
    crate::io::write_atomic(
        &out.join(files::INFERENCE),
        inference_text(&outcome, truth.as_deref()).as_bytes(),
    )?;
    match truth {
        Some(t) => {
            let (mut reports, _) = write_reports(out, &[outcome], &t, cfg)?;
            Ok(reports.pop())
        }
        None => Ok(None),
    }
}

pub fn baselines_cmd(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<AttackReport>> {
    let data = prepare_data(cfg)?;
    let target = load_target(&data, out)?;
    let (eval, labeled) = split_posteriors(&target, &data)?;
    let mut forced = cfg.clone();
    forced.baselines.enabled = true;
    let outcomes = baseline_outcomes(&forced, &data, &target, &labeled, &eval)?;
    let truth = eval.membership().expect("target set carries membership");
    let (reports, _) = write_reports(out, &outcomes, &truth, cfg)?;
    Ok(reports)
}

