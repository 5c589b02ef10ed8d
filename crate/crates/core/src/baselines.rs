//! The posterior-based comparison attacks: four threshold rules, prediction
//! correctness, and a single-shadow neural attack.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::clmia::MembershipDecision;
use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::features::{check_simplex, entropy};
use crate::metrics::{AttackOutcome, Confusion};
use crate::nn::{softmax, Activation, Network, NetworkSpec};
use crate::seed::{self, stream};
use crate::target::{argmax, fit_classifier, train_target, ClassifierTraining};

const LOG_FLOOR: f64 = 1e-12;

fn clamped_ln(v: f64) -> f64 {
    v.max(LOG_FLOOR).ln()
}

fn check_label(p: &[f64], y: usize) -> Result<()> {
    if y >= p.len() {
        return Err(Error::Domain(format!("label {y} out of range for {} classes", p.len())));
    }
    Ok(())
}

pub fn stat_top1(p: &[f64]) -> Result<f64> {
    p.iter()
        .copied()
        .reduce(f64::max)
        .ok_or_else(|| Error::Domain("empty posterior".into()))
}

pub fn stat_entropy(p: &[f64]) -> Result<f64> {
    entropy(p)
}

/// `-(1 - p_y) ln p_y - sum_{i != y} p_i ln(1 - p_i)`, logs floored at 1e-12.
pub fn stat_modified_entropy(p: &[f64], y: usize) -> Result<f64> {
    check_label(p, y)?;
    check_simplex(p)?;
    Ok(modified_entropy_formula(p, y).max(0.0))
}

/// The modified-entropy expression evaluated coordinate-wise on any vector in
/// `[0, 1]^C`, without the simplex check. Panics if `y` is out of range.
pub fn modified_entropy_formula(p: &[f64], y: usize) -> f64 {
    let mut total = -(1.0 - p[y]) * clamped_ln(p[y]);
    for (i, &pi) in p.iter().enumerate() {
        if i != y {
            total -= pi * clamped_ln(1.0 - pi);
        }
    }
    total
}

/// Cross-entropy of the true class, `-ln p_y` (floored).
pub fn stat_loss(p: &[f64], y: usize) -> Result<f64> {
    check_label(p, y)?;
    Ok((-clamped_ln(p[y])).max(0.0))
}

/// Member iff the target's top class is the true class (lowest index wins ties).
pub fn correctness_attack(p: &[f64], y: usize) -> Result<MembershipDecision> {
    check_label(p, y)?;
    let hit = argmax(p) == y;
    Ok(MembershipDecision {
        member: hit,
        score: if hit { 1.0 } else { 0.0 },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    Top1,
    Entropy,
    ModifiedEntropy,
    Loss,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Member iff score >= threshold.
    AtLeast,
    /// Member iff score <= threshold.
    AtMost,
}

impl Direction {
    pub fn decide(self, score: f64, threshold: f64) -> bool {
        match self {
            Direction::AtLeast => score >= threshold,
            Direction::AtMost => score <= threshold,
        }
    }
}

impl StatisticKind {
    pub const ALL: [StatisticKind; 4] = [
        StatisticKind::Top1,
        StatisticKind::Entropy,
        StatisticKind::ModifiedEntropy,
        StatisticKind::Loss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::Top1 => "top1",
            StatisticKind::Entropy => "entropy",
            StatisticKind::ModifiedEntropy => "modified_entropy",
            StatisticKind::Loss => "loss",
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            StatisticKind::Top1 => Direction::AtLeast,
            _ => Direction::AtMost,
        }
    }

    pub fn compute(self, p: &[f64], y: usize) -> Result<f64> {
        match self {
            StatisticKind::Top1 => stat_top1(p),
            StatisticKind::Entropy => stat_entropy(p),
            StatisticKind::ModifiedEntropy => stat_modified_entropy(p, y),
            StatisticKind::Loss => stat_loss(p, y),
        }
    }
}

fn balanced(tp: usize, pos: usize, tn: usize, neg: usize) -> f64 {
    0.5 * (tp as f64 / pos as f64 + tn as f64 / neg as f64)
}

/// Picks the threshold with the best balanced accuracy among the midpoints of
/// adjacent sorted unique scores; the smallest such threshold wins ties.
/// If every score is equal that score is returned (balanced accuracy 0.5).
pub fn calibrate_threshold(scores: &[f64], members: &[bool], direction: Direction) -> Result<(f64, f64)> {
    if scores.len() != members.len() {
        return Err(Error::shape("calibration labels", scores.len(), members.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Metric("calibration scores must be finite".into()));
    }
    let pos = members.iter().filter(|m| **m).count();
    let neg = members.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric(
            "calibration needs both members and non-members".into(),
        ));
    }

    // (value, members at value, non-members at value), ascending.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for &i in &order {
        match groups.last_mut() {
            Some(g) if g.0 == scores[i] => {
                if members[i] { g.1 += 1 } else { g.2 += 1 }
            }
            _ => groups.push((scores[i], usize::from(members[i]), usize::from(!members[i]))),
        }
    }
    if groups.len() == 1 {
        let d: Vec<bool> = scores.iter().map(|&s| direction.decide(s, groups[0].0)).collect();
        let c = Confusion::from_decisions(&d, members)?;
        return Ok((groups[0].0, balanced(c.tp, pos, c.tn, neg)));
    }

    let mut best: Option<(f64, f64)> = None;
    // Cumulative counts of groups at or below the cut.
    let (mut below_pos, mut below_neg) = (0usize, 0usize);
    for w in groups.windows(2) {
        below_pos += w[0].1;
        below_neg += w[0].2;
        let tau = 0.5 * (w[0].0 + w[1].0);
        let ba = match direction {
            Direction::AtLeast => balanced(pos - below_pos, pos, below_neg, neg),
            Direction::AtMost => balanced(below_pos, pos, neg - below_neg, neg),
        };
        if best.is_none_or(|(_, b)| ba > b) {
            best = Some((tau, ba));
        }
    }
    Ok(best.expect("at least two groups"))
}

/// A calibrated single-statistic threshold rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAttack {
    pub kind: StatisticKind,
    pub threshold: f64,
    pub direction: Direction,
    /// Balanced accuracy on the calibration set.
    pub calibration_accuracy: f64,
}

impl ThresholdAttack {
    pub fn new(kind: StatisticKind, threshold: f64) -> Self {
        ThresholdAttack {
            kind,
            threshold,
            direction: kind.direction(),
            calibration_accuracy: f64::NAN,
        }
    }

    /// Calibrates on labeled `(posterior, class)` rows with membership bits.
    pub fn calibrate(kind: StatisticKind, rows: &[(Vec<f64>, usize)], members: &[bool]) -> Result<Self> {
        let scores = rows
            .iter()
            .map(|(p, y)| kind.compute(p, *y))
            .collect::<Result<Vec<_>>>()?;
        let (threshold, ba) = calibrate_threshold(&scores, members, kind.direction())?;
        Ok(ThresholdAttack {
            kind,
            threshold,
            direction: kind.direction(),
            calibration_accuracy: ba,
        })
    }

    pub fn infer(&self, p: &[f64], y: usize) -> Result<MembershipDecision> {
        let stat = self.kind.compute(p, y)?;
        Ok(MembershipDecision {
            member: self.direction.decide(stat, self.threshold),
            score: self.member_score(stat),
        })
    }

    /// Statistic oriented so that larger means "more likely member".
    fn member_score(&self, stat: f64) -> f64 {
        match self.direction {
            Direction::AtLeast => stat,
            Direction::AtMost => -stat,
        }
    }

    pub fn outcome(&self, rows: &[(Vec<f64>, usize)]) -> Result<AttackOutcome> {
        let decisions = rows
            .iter()
            .map(|(p, y)| self.infer(p, *y))
            .collect::<Result<Vec<_>>>()?;
        Ok(outcome_from(self.kind.name(), &decisions))
    }
}

pub fn correctness_outcome(rows: &[(Vec<f64>, usize)]) -> Result<AttackOutcome> {
    let decisions = rows
        .iter()
        .map(|(p, y)| correctness_attack(p, *y))
        .collect::<Result<Vec<_>>>()?;
    Ok(outcome_from("correctness", &decisions))
}

fn outcome_from(name: &str, decisions: &[MembershipDecision]) -> AttackOutcome {
    AttackOutcome {
        attack: name.to_string(),
        decisions: decisions.iter().map(|d| d.member).collect(),
        scores: decisions.iter().map(|d| d.score).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NnAttackConfig {
    /// Hidden widths of the binary attack network.
    pub hidden: Vec<usize>,
    pub training: ClassifierTraining,
}

impl Default for NnAttackConfig {
    fn default() -> Self {
        NnAttackConfig {
            hidden: vec![64],
            training: ClassifierTraining {
                epochs: 100,
                learning_rate: 0.05,
                batch_size: 32,
                ..ClassifierTraining::default()
            },
        }
    }
}

/// Shadow classifier plus the binary network that reads its posteriors.
#[derive(Clone, Debug)]
pub struct NnAttackModel {
    pub shadow: Network,
    pub attack: Network,
}

fn feature_key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

fn sorted_desc(p: &[f64]) -> Vec<f64> {
    let mut v = p.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Trains the shadow on half of `aux` (the other half plays non-members) with
/// the target's architecture and schedule, then fits the attack network on
/// the shadow's descending-sorted posteriors.
pub fn nn_attack_train(
    aux: &[LabeledSample],
    target_train: &[LabeledSample],
    target_spec: &NetworkSpec,
    shadow_training: &ClassifierTraining,
    cfg: &NnAttackConfig,
    seed_value: u64,
) -> Result<NnAttackModel> {
    if aux.len() < 2 {
        return Err(Error::Data("the NN attack needs at least two auxiliary samples".into()));
    }
    let seen: HashSet<Vec<u64>> = target_train.iter().map(|s| feature_key(&s.features)).collect();
    if let Some(i) = aux.iter().position(|s| seen.contains(&feature_key(&s.features))) {
        return Err(Error::Data(format!(
            "auxiliary sample {i} also appears in the target training set"
        )));
    }

    let mut order: Vec<usize> = (0..aux.len()).collect();
    order.shuffle(&mut seed::derived_rng(seed_value, stream::NN_ATTACK, 0));
    let (inside, outside) = order.split_at(aux.len() / 2);
    let pick = |idx: &[usize]| idx.iter().map(|&i| aux[i].clone()).collect::<Vec<_>>();
    let (shadow_in, shadow_out) = (pick(inside), pick(outside));

    let mut spec = target_spec.clone();
    spec.seed = seed::derive(seed_value, stream::NN_ATTACK, 1);
    let (shadow, _) = train_target(&shadow_in, &shadow_out, spec, shadow_training)?;

    let mut inputs = Vec::with_capacity(aux.len());
    let mut labels = Vec::with_capacity(aux.len());
    for (set, label) in [(&shadow_in, 1usize), (&shadow_out, 0usize)] {
        for s in set {
            inputs.push(sorted_desc(&softmax(&shadow.predict(&s.features)?)));
            labels.push(label);
        }
    }
    let mut sizes = vec![shadow.output_dim()];
    sizes.extend(&cfg.hidden);
    sizes.push(2);
    let mut attack = Network::new(NetworkSpec::mlp(
        &sizes,
        Activation::Relu,
        seed::derive(seed_value, stream::NN_ATTACK, 2),
    ))?;
    fit_classifier(
        &mut attack,
        &inputs,
        &labels,
        &cfg.training,
        stream::NN_ATTACK,
        seed::derive(seed_value, stream::NN_ATTACK, 3),
    )?;
    Ok(NnAttackModel { shadow, attack })
}

impl NnAttackModel {
    pub fn infer(&self, p: &[f64]) -> Result<MembershipDecision> {
        let score = softmax(&self.attack.predict(&sorted_desc(p))?)[1];
        Ok(MembershipDecision::from_score(score, 0.5))
    }

    pub fn outcome(&self, posteriors: &[Vec<f64>]) -> Result<AttackOutcome> {
        let decisions = posteriors
            .iter()
            .map(|p| self.infer(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(outcome_from("nn_attack", &decisions))
    }
}
