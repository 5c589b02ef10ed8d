//! Grid sweeps over temperature, dropout rates and the labeled set.
//!
//! One target model serves the whole sweep and `D_t` is the same in every
//! cell. Encoders are trained once per `(tau, d1, d2)` and fine-tuned once per
//! labeled-set cell, so each cell differs from its neighbours only in the
//! swept factor.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::manifest::{RunManifest, StageRunner};
use super::pipeline::{
    attack_outcome, files, finetune_attack, prepare_data, prepare_data_with_split, save_network,
    split_posteriors, train_only_fc, train_target_model, CLMIA, ONLY_FC,
};
use crate::clmia::{train_encoder, AttackModel};
use crate::data::{PosteriorDump, Ratio, SplitConfig};
use crate::error::{Error, Result};
use crate::metrics::AttackReport;
use crate::target::TargetModel;

pub const ABLATION_REPORTS: &str = "ablation.json";

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledCell {
    pub size: usize,
    pub ratio: Ratio,
}

/// Labeled-set cells of the sweep, sizes outermost.
pub fn labeled_cells(cfg: &ExperimentConfig) -> Vec<LabeledCell> {
    let sizes = cfg
        .ablation
        .labeled_sizes
        .clone()
        .unwrap_or_else(|| vec![cfg.split.labeled_count]);
    let ratios = cfg
        .ablation
        .ratios
        .clone()
        .unwrap_or_else(|| vec![cfg.split.labeled_ratio]);
    sizes
        .iter()
        .flat_map(|&size| ratios.iter().map(move |&ratio| LabeledCell { size, ratio }))
        .collect()
}

/// Number of reports [`run_ablation`] produces.
pub fn cell_count(cfg: &ExperimentConfig) -> usize {
    let labeled = labeled_cells(cfg).len();
    let encoders = cfg.ablation.temperatures.len() * cfg.ablation.dropout.len();
    labeled * (encoders + usize::from(cfg.ablation.only_fc))
}

#[derive(Clone, Debug)]
pub struct AblationOutput {
    pub reports: Vec<AttackReport>,
    pub manifest: RunManifest,
}

struct CellData {
    cell: LabeledCell,
    labeled: PosteriorDump,
}

fn params(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

pub fn run_ablation(cfg: &ExperimentConfig, out: &Path) -> Result<AblationOutput> {
    cfg.validate()?;
    let hash = cfg.hash();
    let mut runner = StageRunner::new("ablate", out, &hash, cfg.seed);
    let base = runner.stage("data", |_| Ok((prepare_data(cfg)?, vec![])))?;

    let target = runner.stage("target", |out| {
        if base.external {
            return Ok((TargetModel::Precomputed { n_classes: base.n_classes }, vec![]));
        }
        let (net, profile) = train_target_model(cfg, &base)?;
        save_network(&net, &out.join(files::TARGET_CKPT))?;
        crate::io::write_json(&out.join(files::TARGET_PROFILE), &profile)?;
        Ok((
            TargetModel::Network(Arc::new(net)),
            vec![files::TARGET_CKPT.into(), files::TARGET_PROFILE.into()],
        ))
    })?;

    let (eval, cells) = runner.stage("labeled_sets", |_| {
        let (eval, _) = split_posteriors(&target, &base)?;
        let cells = labeled_cells(cfg)
            .into_iter()
            .map(|cell| {
                let split_cfg = SplitConfig {
                    labeled_count: cell.size,
                    labeled_ratio: cell.ratio,
                    ..cfg.split.clone()
                };
                let data = prepare_data_with_split(cfg, &split_cfg)?;
                if data.split.target != base.split.target {
                    return Err(Error::State("labeled-set cell changed the target set".into()));
                }
                let (_, labeled) = split_posteriors(&target, &data)?;
                Ok(CellData { cell, labeled })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(((eval, cells), vec![]))
    })?;
    let truth = eval.membership().expect("target set carries membership");

    let encoder_grid: Vec<(f64, [f64; 2])> = cfg
        .ablation
        .temperatures
        .iter()
        .flat_map(|&t| cfg.ablation.dropout.iter().map(move |&d| (t, d)))
        .collect();
    let inputs = base.split.target.inputs();
    let encoders: Vec<AttackModel> = runner.stage("contrastive", |_| {
        let models = encoder_grid
            .par_iter()
            .map(|&(tau, [d1, d2])| {
                let mut c = cfg.contrastive();
                c.temperature = tau;
                c.d1 = d1;
                c.d2 = d2;
                let shadows = c.shadows(target.clone())?;
                train_encoder(&inputs, &shadows, &cfg.arch(), &c)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((models, vec![]))
    })?;

    let reports = runner.stage("cells", |out| {
        // (encoder index or None for Only-FC, labeled cell index)
        let mut jobs: Vec<(Option<usize>, usize)> = Vec::new();
        for e in 0..encoders.len() {
            jobs.extend((0..cells.len()).map(|c| (Some(e), c)));
        }
        if cfg.ablation.only_fc {
            jobs.extend((0..cells.len()).map(|c| (None, c)));
        }
        let reports = jobs
            .par_iter()
            .map(|&(enc, c)| {
                let cd = &cells[c];
                let (name, model, mut p) = match enc {
                    Some(e) => {
                        let (tau, [d1, d2]) = encoder_grid[e];
                        let model = finetune_attack(cfg, encoders[e].clone(), &cd.labeled)?;
                        let p = params(&[
                            ("temperature", tau.to_string()),
                            ("d1", d1.to_string()),
                            ("d2", d2.to_string()),
                        ]);
                        (CLMIA, model, p)
                    }
                    None => (ONLY_FC, train_only_fc(cfg, base.n_classes, &cd.labeled)?, BTreeMap::new()),
                };
                p.insert("labeled_size".into(), cd.cell.size.to_string());
                p.insert("ratio".into(), cd.cell.ratio.to_string());
                let outcome = attack_outcome(name, &model, &eval)?;
                let (mut report, _) = outcome.evaluate(&truth, &hash, cfg.seed)?;
                report.params = p;
                Ok(report)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut artifacts = Vec::with_capacity(reports.len() + 1);
        for (i, r) in reports.iter().enumerate() {
            let name = format!("cells/cell_{i:03}_{}.json", r.attack);
            crate::io::write_json(&out.join(&name), r)?;
            artifacts.push(name);
        }
        crate::io::write_json(&out.join(ABLATION_REPORTS), &reports)?;
        artifacts.push(ABLATION_REPORTS.into());
        Ok((reports, artifacts))
    })?;

    let manifest = runner.finish()?;
    Ok(AblationOutput { reports, manifest })
}
