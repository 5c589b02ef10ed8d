//! The end-to-end pipeline and the per-stage building blocks shared by the
//! CLI subcommands and the ablation runner.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use super::config::{DatasetConfig, ExperimentConfig};
use super::manifest::{RunManifest, StageRunner};
use crate::baselines::{correctness_outcome, nn_attack_train, StatisticKind, ThresholdAttack};
use crate::clmia::{
    attack_data_dump, finetune, load_attack_model, make_attack_data, save_attack_model,
    train_encoder, AttackModel,
};
use crate::data::text::fmt_sig9;
use crate::data::{
    load_posterior_dump, split_known_membership, split_membership, write_feature_dump,
    write_posterior_dump, LabeledSample, MembershipSplit, PosteriorDump, SplitConfig,
};
use crate::error::{Error, Result};
use crate::metrics::{AttackOutcome, AttackReport};
use crate::nn::{read_network, write_network, Network};
use crate::seed::stream;
use crate::target::{posteriors, train_target, TargetModel, TargetProfile};

pub mod files {
    pub const CONFIG: &str = "config.toml";
    pub const TARGET_CKPT: &str = "target.ckpt";
    pub const TARGET_PROFILE: &str = "target_profile.json";
    pub const POSTERIORS_TARGET: &str = "posteriors_target.csv";
    pub const POSTERIORS_LABELED: &str = "posteriors_labeled.csv";
    pub const ATTACK_DATA: &str = "attack_data.csv";
    pub const ENCODER_CKPT: &str = "attack_encoder.ckpt";
    pub const ATTACK_CKPT: &str = "attack.ckpt";
    pub const INFERENCE: &str = "inference.csv";
    pub const REPORTS: &str = "reports.json";
}

/// Name of the CLMIA report.
pub const CLMIA: &str = "clmia";
/// Name of the head-only control.
pub const ONLY_FC: &str = "only_fc";

/// Dataset after membership partitioning.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub n_classes: usize,
    pub split: MembershipSplit,
    /// Samples disjoint from the pool, for the NN attack's shadow.
    pub aux: Vec<LabeledSample>,
    /// Samples are posteriors of an external model rather than raw inputs.
    pub external: bool,
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    prepare_data_with_split(cfg, &cfg.split)
}

pub fn prepare_data_with_split(cfg: &ExperimentConfig, split_cfg: &SplitConfig) -> Result<PreparedData> {
    let split_seed = cfg.stage_seed(stream::SPLIT);
    match &cfg.dataset {
        DatasetConfig::Synthetic { classes, .. } => {
            let (synth, aux_count) = cfg.synthetic().expect("synthetic dataset");
            let mut samples = synth.generate(cfg.stage_seed(stream::DATASET))?.into_samples();
            let aux = samples.split_off(samples.len() - aux_count);
            Ok(PreparedData {
                n_classes: *classes,
                split: split_membership(&samples, split_cfg, split_seed)?,
                aux,
                external: false,
            })
        }
        DatasetConfig::Dump { path } => {
            let dump = load_posterior_dump(path)?;
            let bits = dump.membership().ok_or_else(|| {
                Error::Data(format!("{} has no membership column (labeled=0)", path.display()))
            })?;
            let samples: Vec<LabeledSample> = dump
                .rows
                .into_iter()
                .map(|r| LabeledSample {
                    features: r.probs,
                    label: r.label,
                })
                .collect();
            Ok(PreparedData {
                n_classes: dump.n_classes,
                split: split_known_membership(&samples, &bits, split_cfg, split_seed)?,
                aux: Vec::new(),
                external: true,
            })
        }
    }
}

pub fn train_target_model(cfg: &ExperimentConfig, data: &PreparedData) -> Result<(Network, TargetProfile)> {
    let dim = data
        .split
        .train_members
        .first()
        .map(|s| s.features.len())
        .ok_or_else(|| Error::Data("no target training members".into()))?;
    let spec = cfg.target.spec(dim, data.n_classes, cfg.stage_seed(stream::TARGET_INIT));
    let (net, profile) = train_target(
        &data.split.train_members,
        &data.split.non_members,
        spec,
        &cfg.target.training(),
    )?;
    log::info!(
        "target: train acc {:.3}, test acc {:.3}, gap {:.3}",
        profile.train_accuracy,
        profile.test_accuracy,
        profile.gap()
    );
    Ok((net, profile))
}

pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_network(net, &mut buf)?;
    crate::io::write_atomic(path, &buf)
}

pub fn load_network(path: &Path) -> Result<Network> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_network(bytes.as_slice())
}

/// The target as seen by the attack: the trained network from `out`, or the
/// identity over posteriors for dump datasets.
pub fn load_target(data: &PreparedData, out: &Path) -> Result<TargetModel> {
    if data.external {
        return Ok(TargetModel::Precomputed {
            n_classes: data.n_classes,
        });
    }
    let path = out.join(files::TARGET_CKPT);
    if !path.exists() {
        return Err(Error::State(format!(
            "{} not found; run `train-target` first",
            path.display()
        )));
    }
    Ok(TargetModel::Network(Arc::new(load_network(&path)?)))
}

/// Posteriors of `D_t` and `D_l`, both with membership bits.
pub fn split_posteriors(target: &TargetModel, data: &PreparedData) -> Result<(PosteriorDump, PosteriorDump)> {
    let t = &data.split.target;
    let eval = posteriors(target, &t.samples, Some(&t.membership))?;
    let (samples, bits): (Vec<LabeledSample>, Vec<bool>) = data.split.labeled.iter().cloned().unzip();
    let labeled = posteriors(target, &samples, Some(&bits))?;
    Ok((eval, labeled))
}

fn membership_of(dump: &PosteriorDump) -> Result<Vec<bool>> {
    dump.membership()
        .ok_or_else(|| Error::Data("posterior dump lacks membership bits".into()))
}

/// `(posterior, member)` pairs for fine-tuning.
pub fn labeled_pairs(dump: &PosteriorDump) -> Result<Vec<(Vec<f64>, bool)>> {
    let bits = membership_of(dump)?;
    Ok(dump.rows.iter().map(|r| r.probs.clone()).zip(bits).collect())
}

fn class_rows(dump: &PosteriorDump) -> Vec<(Vec<f64>, usize)> {
    dump.rows.iter().map(|r| (r.probs.clone(), r.label)).collect()
}

/// Contrastive stage on the unlabeled target set.
pub fn train_attack_encoder(cfg: &ExperimentConfig, target: &TargetModel, data: &PreparedData) -> Result<AttackModel> {
    let shadows = cfg.contrastive().shadows(target.clone())?;
    train_encoder(&data.split.target.inputs(), &shadows, &cfg.arch(), &cfg.contrastive())
}

pub fn finetune_attack(cfg: &ExperimentConfig, model: AttackModel, labeled: &PosteriorDump) -> Result<AttackModel> {
    finetune(model, &labeled_pairs(labeled)?, &cfg.arch(), &cfg.finetune())
}

/// Head-only control with the same fine-tuning budget as CLMIA.
pub fn train_only_fc(cfg: &ExperimentConfig, n_classes: usize, labeled: &PosteriorDump) -> Result<AttackModel> {
    finetune_attack(cfg, AttackModel::only_fc(n_classes), labeled)
}

pub fn attack_outcome(name: &str, model: &AttackModel, eval: &PosteriorDump) -> Result<AttackOutcome> {
    let probs: Vec<Vec<f64>> = eval.rows.iter().map(|r| r.probs.clone()).collect();
    let decisions = model.infer_all(&probs)?;
    Ok(AttackOutcome {
        attack: name.to_string(),
        decisions: decisions.iter().map(|d| d.member).collect(),
        scores: decisions.iter().map(|d| d.score).collect(),
    })
}

/// `score,member,truth` per evaluated sample.
pub fn inference_text(outcome: &AttackOutcome, truth: Option<&[bool]>) -> String {
    let mut out = String::from(if truth.is_some() { "score,member,truth\n" } else { "score,member\n" });
    for (i, (s, d)) in outcome.scores.iter().zip(&outcome.decisions).enumerate() {
        write!(out, "{},{}", fmt_sig9(*s), u8::from(*d)).expect("string write");
        if let Some(t) = truth {
            write!(out, ",{}", u8::from(t[i])).expect("string write");
        }
        out.push('\n');
    }
    out
}

/// Every enabled comparison attack, scored on `eval`.
pub fn baseline_outcomes(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    target: &TargetModel,
    labeled: &PosteriorDump,
    eval: &PosteriorDump,
) -> Result<Vec<AttackOutcome>> {
    let mut outcomes = Vec::new();
    if !cfg.baselines.enabled {
        return Ok(outcomes);
    }
    let calib_rows = class_rows(labeled);
    let calib_bits = membership_of(labeled)?;
    let eval_rows = class_rows(eval);
    for kind in StatisticKind::ALL {
        let attack = ThresholdAttack::calibrate(kind, &calib_rows, &calib_bits)?;
        log::info!("{}: threshold {:.6}", kind.name(), attack.threshold);
        outcomes.push(attack.outcome(&eval_rows)?);
    }
    outcomes.push(correctness_outcome(&eval_rows)?);
    if cfg.baselines.only_fc {
        let model = train_only_fc(cfg, data.n_classes, labeled)?;
        outcomes.push(attack_outcome(ONLY_FC, &model, eval)?);
    }
    if cfg.baselines.nn_attack {
        match target.network() {
            Some(net) if !data.aux.is_empty() => {
                let nn = nn_attack_train(
                    &data.aux,
                    &data.split.train_members,
                    net.spec(),
                    &cfg.target.training(),
                    &cfg.baselines.nn_config(),
                    cfg.stage_seed(stream::NN_ATTACK),
                )?;
                let probs: Vec<Vec<f64>> = eval.rows.iter().map(|r| r.probs.clone()).collect();
                outcomes.push(nn.outcome(&probs)?);
            }
            _ => log::warn!("nn_attack skipped: needs a trained target and auxiliary data (dataset.aux > 0)"),
        }
    }
    Ok(outcomes)
}

/// Summarizes outcomes against `truth`, writing `report_<attack>.json` and
/// `roc_<attack>.csv` under `out`.
pub fn write_reports(
    out: &Path,
    outcomes: &[AttackOutcome],
    truth: &[bool],
    cfg: &ExperimentConfig,
) -> Result<(Vec<AttackReport>, Vec<String>)> {
    let hash = cfg.hash();
    let mut reports = Vec::with_capacity(outcomes.len());
    let mut artifacts = Vec::new();
    for o in outcomes {
        let (report, curve) = o.evaluate(truth, &hash, cfg.seed)?;
        let report_name = format!("report_{}.json", o.attack);
        let roc_name = format!("roc_{}.csv", o.attack);
        crate::io::write_json(&out.join(&report_name), &report)?;
        curve.write(&out.join(&roc_name))?;
        log::info!(
            "{}: balanced accuracy {:.4}, AUC {:.4}",
            report.attack,
            report.balanced_accuracy,
            report.auc
        );
        artifacts.push(report_name);
        artifacts.push(roc_name);
        reports.push(report);
    }
    Ok((reports, artifacts))
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub reports: Vec<AttackReport>,
    pub manifest: RunManifest,
    pub target_profile: Option<TargetProfile>,
}

impl RunOutput {
    pub fn report(&self, attack: &str) -> Option<&AttackReport> {
        self.reports.iter().find(|r| r.attack == attack)
    }
}

/// The full pipeline: target, shadows, attack data, contrastive training,
/// fine-tuning, inference, metrics, baselines. Everything lands under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    let mut runner = StageRunner::new("run", out, &cfg.hash(), cfg.seed);
    runner.stage("config", |out| {
        crate::io::write_atomic(&out.join(files::CONFIG), cfg.to_toml()?.as_bytes())?;
        Ok(((), vec![files::CONFIG.into()]))
    })?;
    let data = runner.stage("data", |_| Ok((prepare_data(cfg)?, vec![])))?;

    let (target, profile) = runner.stage("target", |out| {
        if data.external {
            let t = TargetModel::Precomputed {
                n_classes: data.n_classes,
            };
            return Ok(((t, None), vec![]));
        }
        let (net, profile) = train_target_model(cfg, &data)?;
        save_network(&net, &out.join(files::TARGET_CKPT))?;
        crate::io::write_json(&out.join(files::TARGET_PROFILE), &profile)?;
        Ok((
            (TargetModel::Network(Arc::new(net)), Some(profile)),
            vec![files::TARGET_CKPT.into(), files::TARGET_PROFILE.into()],
        ))
    })?;

    let (eval, labeled) = runner.stage("posteriors", |out| {
        let (eval, labeled) = split_posteriors(&target, &data)?;
        write_posterior_dump(&eval, out.join(files::POSTERIORS_TARGET))?;
        write_posterior_dump(&labeled, out.join(files::POSTERIORS_LABELED))?;
        Ok((
            (eval, labeled),
            vec![files::POSTERIORS_TARGET.into(), files::POSTERIORS_LABELED.into()],
        ))
    })?;

    let contrastive = cfg.contrastive();
    let shadows = runner.stage("shadows", |_| Ok((contrastive.shadows(target.clone())?, vec![])))?;

    runner.stage("attack_data", |out| {
        let pairs = make_attack_data(
            &data.split.target.inputs(),
            &shadows,
            contrastive.features_after_dropout,
            contrastive.view_seed(),
            0,
        )?;
        write_feature_dump(&attack_data_dump(&pairs), out.join(files::ATTACK_DATA))?;
        Ok(((), vec![files::ATTACK_DATA.into()]))
    })?;

    let encoder = runner.stage("contrastive", |out| {
        let model = train_encoder(&data.split.target.inputs(), &shadows, &cfg.arch(), &contrastive)?;
        save_attack_model(&model, &out.join(files::ENCODER_CKPT))?;
        Ok((model, vec![files::ENCODER_CKPT.into()]))
    })?;

    let model = runner.stage("finetune", |out| {
        let model = finetune_attack(cfg, encoder, &labeled)?;
        save_attack_model(&model, &out.join(files::ATTACK_CKPT))?;
        Ok((model, vec![files::ATTACK_CKPT.into()]))
    })?;

    let truth = membership_of(&eval)?;
    let clmia = runner.stage("inference", |out| {
        let o = attack_outcome(CLMIA, &model, &eval)?;
        crate::io::write_atomic(&out.join(files::INFERENCE), inference_text(&o, Some(&truth)).as_bytes())?;
        Ok((o, vec![files::INFERENCE.into()]))
    })?;

    let mut reports = runner.stage("metrics", |out| write_reports(out, &[clmia], &truth, cfg))?;

    let baseline_reports = runner.stage("baselines", |out| {
        let outcomes = baseline_outcomes(cfg, &data, &target, &labeled, &eval)?;
        write_reports(out, &outcomes, &truth, cfg)
    })?;
    reports.extend(baseline_reports);

    runner.stage("reports", |out| {
        crate::io::write_json(&out.join(files::REPORTS), &reports)?;
        Ok(((), vec![files::REPORTS.into()]))
    })?;
    let manifest = runner.finish()?;
    Ok(RunOutput {
        reports,
        manifest,
        target_profile: profile,
    })
}

/// Reads a previously written attack checkpoint from `out`.
pub fn load_attack(out: &Path, name: &str) -> Result<AttackModel> {
    let path = out.join(name);
    if !path.exists() {
        return Err(Error::State(format!("{} not found; run the earlier stage first", path.display())));
    }
    load_attack_model(&path)
}
