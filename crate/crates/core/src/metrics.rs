//! Attack evaluation: balanced accuracy, F1, ROC/AUC and TPR at low FPR.
//!
//! Members are the positive class throughout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::text::fmt_sig9;
use crate::error::{Error, Result};

/// FPR levels reported in every [`AttackReport`].
pub const LOW_FPR_LEVELS: [f64; 3] = [0.001, 0.01, 0.1];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_decisions(decisions: &[bool], truth: &[bool]) -> Result<Self> {
        if decisions.len() != truth.len() {
            return Err(Error::shape("decisions", truth.len(), decisions.len()));
        }
        let mut c = Confusion::default();
        for (&d, &t) in decisions.iter().zip(truth) {
            match (d, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }
}

fn require_both_classes(truth: &[bool]) -> Result<()> {
    let pos = truth.iter().filter(|t| **t).count();
    if pos == 0 || pos == truth.len() {
        return Err(Error::Metric(
            "ground truth must contain both members and non-members".into(),
        ));
    }
    Ok(())
}

/// `(TPR + TNR) / 2`.
pub fn balanced_accuracy(decisions: &[bool], truth: &[bool]) -> Result<f64> {
    require_both_classes(truth)?;
    let c = Confusion::from_decisions(decisions, truth)?;
    let tpr = c.tp as f64 / c.positives() as f64;
    let tnr = c.tn as f64 / c.negatives() as f64;
    Ok(0.5 * (tpr + tnr))
}

/// Harmonic mean of precision and recall; 0 when nothing is predicted member
/// or nothing is a member.
pub fn f1(decisions: &[bool], truth: &[bool]) -> Result<f64> {
    let c = Confusion::from_decisions(decisions, truth)?;
    if c.tp == 0 {
        return Ok(0.0);
    }
    let precision = c.tp as f64 / (c.tp + c.fp) as f64;
    let recall = c.tp as f64 / (c.tp + c.fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Decision threshold (member iff score >= threshold); `+inf` for the origin.
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC from a threshold sweep over the unique scores, highest first.
/// Equal scores move together; AUC is the trapezoid area, which equals the
/// Mann-Whitney U statistic with half credit for ties.
pub fn roc(scores: &[f64], truth: &[bool]) -> Result<RocCurve> {
    if scores.len() != truth.len() {
        return Err(Error::shape("scores", truth.len(), scores.len()));
    }
    require_both_classes(truth)?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Metric("scores must be finite".into()));
    }
    let pos = truth.iter().filter(|t| **t).count() as f64;
    let neg = truth.len() as f64 - pos;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let prev = points.last().expect("origin present");
        let (fpr, tpr) = (fp as f64 / neg, tp as f64 / pos);
        auc += (fpr - prev.fpr) * (tpr + prev.tpr) * 0.5;
        points.push(RocPoint {
            fpr,
            tpr,
            threshold,
        });
    }
    Ok(RocCurve { points, auc })
}

/// Largest TPR among operating points with FPR <= `fpr_target` (step
/// convention, no interpolation).
pub fn tpr_at_fpr(curve: &RocCurve, fpr_target: f64) -> f64 {
    curve
        .points
        .iter()
        .filter(|p| p.fpr <= fpr_target + 1e-12)
        .map(|p| p.tpr)
        .fold(0.0, f64::max)
}

impl RocCurve {
    /// Two-column `fpr,tpr` text for external plotting.
    pub fn to_text(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for p in &self.points {
            writeln!(out, "{},{}", fmt_sig9(p.fpr), fmt_sig9(p.tpr)).expect("string write");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_text().as_bytes())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TprAtFpr {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub attack: String,
    pub balanced_accuracy: f64,
    pub f1: f64,
    pub auc: f64,
    pub tpr_at_fpr: Vec<TprAtFpr>,
    pub n_members: usize,
    pub n_non_members: usize,
    pub config_hash: String,
    pub seed: u64,
    /// Cell coordinates for ablation sweeps, extra provenance otherwise.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
}

/// Scored decisions of one attack, ready to be summarized.
#[derive(Clone, Debug)]
pub struct AttackOutcome {
    pub attack: String,
    pub decisions: Vec<bool>,
    /// Larger means "more likely member".
    pub scores: Vec<f64>,
}

impl AttackOutcome {
    pub fn evaluate(&self, truth: &[bool], config_hash: &str, seed_value: u64) -> Result<(AttackReport, RocCurve)> {
        let curve = roc(&self.scores, truth)?;
        let members = truth.iter().filter(|t| **t).count();
        let report = AttackReport {
            attack: self.attack.clone(),
            balanced_accuracy: balanced_accuracy(&self.decisions, truth)?,
            f1: f1(&self.decisions, truth)?,
            auc: curve.auc,
            tpr_at_fpr: LOW_FPR_LEVELS
                .iter()
                .map(|&fpr| TprAtFpr {
                    fpr,
                    tpr: tpr_at_fpr(&curve, fpr),
                })
                .collect(),
            n_members: members,
            n_non_members: truth.len() - members,
            config_hash: config_hash.to_string(),
            seed: seed_value,
            params: BTreeMap::new(),
        };
        Ok((report, curve))
    }
}
