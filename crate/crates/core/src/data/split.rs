//! Membership partitioning.
//!
//! A pool of samples is cut into the target model's training members and the
//! held-out non-members. From those two sets we draw, disjointly:
//!
//! * the unlabeled target set `D_t` whose membership the attack infers, and
//! * the small labeled set `D_l` used for fine-tuning and threshold calibration.
//!
//! `D_t` is drawn first and has a fixed size, so sweeping the size or
//! member ratio of `D_l` never changes `D_t`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::LabeledSample;
use crate::error::{Error, Result};
use crate::seed;

/// Member : non-member proportion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ratio {
    pub members: u32,
    pub non_members: u32,
}

impl Ratio {
    pub const fn new(members: u32, non_members: u32) -> Self {
        Ratio {
            members,
            non_members,
        }
    }

    /// Member count for a set of `total` samples, rounded to nearest.
    pub fn member_count(&self, total: usize) -> usize {
        let parts = (self.members + self.non_members) as f64;
        ((total as f64) * self.members as f64 / parts).round() as usize
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.members, self.non_members)
    }
}

impl FromStr for Ratio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::param(format!("ratio `{s}` is not of the form m:n")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<u32>()
                .map_err(|_| Error::param(format!("ratio `{s}` has a non-integer part")))
        };
        let r = Ratio::new(parse(a)?, parse(b)?);
        if r.members + r.non_members == 0 {
            return Err(Error::param("ratio 0:0 is meaningless"));
        }
        Ok(r)
    }
}

impl Serialize for Ratio {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Fraction of the pool used to train the target model.
    pub member_fraction: f64,
    /// Size of `D_t`.
    pub target_count: usize,
    /// Fraction of `D_t` drawn from the members (0.5 = balanced).
    pub target_member_fraction: f64,
    /// Size of `D_l`.
    pub labeled_count: usize,
    pub labeled_ratio: Ratio,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            member_fraction: 0.5,
            target_count: 800,
            target_member_fraction: 0.5,
            labeled_count: 600,
            labeled_ratio: Ratio::new(1, 1),
        }
    }
}

/// Samples whose membership the attack must infer. Ground truth is kept in a
/// separate vector that the unsupervised training path never receives.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetSet {
    pub samples: Vec<LabeledSample>,
    pub membership: Vec<bool>,
}

impl TargetSet {
    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.features.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MembershipSplit {
    pub train_members: Vec<LabeledSample>,
    pub non_members: Vec<LabeledSample>,
    /// `D_l`: samples with their membership bit.
    pub labeled: Vec<(LabeledSample, bool)>,
    /// `D_t`.
    pub target: TargetSet,
}

impl MembershipSplit {
    pub fn labeled_member_count(&self) -> usize {
        self.labeled.iter().filter(|(_, m)| *m).count()
    }
}

/// Partition `samples` per `cfg`. See the module docs for the layout.
pub fn split_membership(
    samples: &[LabeledSample],
    cfg: &SplitConfig,
    seed_value: u64,
) -> Result<MembershipSplit> {
    if !(0.0..=1.0).contains(&cfg.member_fraction) {
        return Err(Error::param("member_fraction must lie in [0, 1]"));
    }
    if !(0.0..=1.0).contains(&cfg.target_member_fraction) {
        return Err(Error::param("target_member_fraction must lie in [0, 1]"));
    }
    let n = samples.len();
    let n_members = ((n as f64) * cfg.member_fraction).round() as usize;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::derived_rng(seed_value, seed::stream::SPLIT, 0));
    let (member_idx, non_idx) = order.split_at(n_members);
    draw_sets(samples, member_idx, non_idx, cfg, seed_value)
}

/// Like [`split_membership`] for a pool whose membership is already fixed,
/// e.g. a labeled posterior dump of an external target. `member_fraction` is
/// ignored.
pub fn split_known_membership(
    samples: &[LabeledSample],
    membership: &[bool],
    cfg: &SplitConfig,
    seed_value: u64,
) -> Result<MembershipSplit> {
    if samples.len() != membership.len() {
        return Err(Error::shape("membership bits", samples.len(), membership.len()));
    }
    if !(0.0..=1.0).contains(&cfg.target_member_fraction) {
        return Err(Error::param("target_member_fraction must lie in [0, 1]"));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut seed::derived_rng(seed_value, seed::stream::SPLIT, 0));
    let (member_idx, non_idx): (Vec<usize>, Vec<usize>) =
        order.into_iter().partition(|&i| membership[i]);
    draw_sets(samples, &member_idx, &non_idx, cfg, seed_value)
}

fn draw_sets(
    samples: &[LabeledSample],
    member_idx: &[usize],
    non_idx: &[usize],
    cfg: &SplitConfig,
    seed_value: u64,
) -> Result<MembershipSplit> {

    let t_members = ((cfg.target_count as f64) * cfg.target_member_fraction).round() as usize;
    let t_non = cfg.target_count - t_members;
    if t_members > member_idx.len() || t_non > non_idx.len() {
        return Err(Error::param(format!(
            "target set needs {t_members} members and {t_non} non-members but the pool has {} and {}",
            member_idx.len(),
            non_idx.len()
        )));
    }

    let avail_m = member_idx.len() - t_members;
    let avail_n = non_idx.len() - t_non;
    let l_members = cfg.labeled_ratio.member_count(cfg.labeled_count);
    let l_non = cfg.labeled_count - l_members;
    if cfg.labeled_count > avail_m + avail_n {
        return Err(Error::param(format!(
            "labeled_count {} exceeds the {} samples left after drawing the target set",
            cfg.labeled_count,
            avail_m + avail_n
        )));
    }
    if l_members > avail_m || l_non > avail_n {
        let closest_m = l_members.clamp(cfg.labeled_count - avail_n, avail_m);
        let closest_n = cfg.labeled_count - closest_m;
        return Err(Error::param(format!(
            "ratio {} needs {l_members} members and {l_non} non-members but only {avail_m} and {avail_n} remain; \
             closest realizable ratio for {} labeled samples is {closest_m}:{closest_n}",
            cfg.labeled_ratio, cfg.labeled_count
        )));
    }

    let take = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    let train_members = take(member_idx);
    let non_members = take(non_idx);

    let mut target_rows: Vec<(LabeledSample, bool)> = member_idx[..t_members]
        .iter()
        .map(|&i| (samples[i].clone(), true))
        .chain(non_idx[..t_non].iter().map(|&i| (samples[i].clone(), false)))
        .collect();
    target_rows.shuffle(&mut seed::derived_rng(seed_value, seed::stream::SPLIT, 1));
    let (t_samples, t_bits) = target_rows.into_iter().unzip();

    let mut labeled: Vec<(LabeledSample, bool)> = member_idx[t_members..t_members + l_members]
        .iter()
        .map(|&i| (samples[i].clone(), true))
        .chain(
            non_idx[t_non..t_non + l_non]
                .iter()
                .map(|&i| (samples[i].clone(), false)),
        )
        .collect();
    labeled.shuffle(&mut seed::derived_rng(seed_value, seed::stream::SPLIT, 2));

    Ok(MembershipSplit {
        train_members,
        non_members,
        labeled,
        target: TargetSet {
            samples: t_samples,
            membership: t_bits,
        },
    })
}
