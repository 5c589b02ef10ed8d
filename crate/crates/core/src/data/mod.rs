//! Datasets with known membership ground truth.

mod dump;
mod split;
mod synthetic;
pub(crate) mod text;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dump::{
    load_feature_dump, load_posterior_dump, read_feature_dump, read_posterior_dump,
    write_feature_dump, write_posterior_dump, FeatureDump, PosteriorDump, PosteriorRow,
};
pub use split::{split_known_membership, split_membership, MembershipSplit, Ratio, SplitConfig, TargetSet};
pub use synthetic::{gen_synthetic, SyntheticConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    n_classes: usize,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>, n_classes: usize) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::param("a classification dataset needs at least 2 classes"));
        }
        if let Some(first) = samples.first() {
            let dim = first.features.len();
            for (i, s) in samples.iter().enumerate() {
                if s.features.len() != dim {
                    return Err(Error::Data(format!(
                        "sample {i} has {} features, expected {dim}",
                        s.features.len()
                    )));
                }
                if s.label >= n_classes {
                    return Err(Error::Data(format!(
                        "sample {i} has label {} but only {n_classes} classes",
                        s.label
                    )));
                }
            }
        }
        Ok(Dataset { samples, n_classes })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<LabeledSample> {
        self.samples
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Reads `f_1,..,f_d,label` rows. A first line that does not parse as numbers
/// is treated as a header and skipped. The class count is `max(label) + 1`
/// unless `n_classes` is given.
pub fn load_labeled_csv(path: impl AsRef<Path>, n_classes: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labeled_csv(&content, n_classes)
}

pub fn parse_labeled_csv(content: &str, n_classes: Option<usize>) -> Result<Dataset> {
    let mut samples = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields[..fields.len() - 1].iter().map(|f| f.parse::<f64>()).collect();
        let label = fields[fields.len() - 1].parse::<usize>();
        match (parsed, label) {
            (Ok(features), Ok(label)) if !features.is_empty() => {
                if features.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Format {
                        line: idx + 1,
                        reason: "non-finite feature".into(),
                    });
                }
                samples.push(LabeledSample { features, label })
            }
            _ if samples.is_empty() && idx == 0 => continue,
            _ => {
                return Err(Error::Format {
                    line: idx + 1,
                    reason: "expected numeric features followed by an integer label".into(),
                })
            }
        }
    }
    let classes = n_classes.unwrap_or_else(|| samples.iter().map(|s| s.label + 1).max().unwrap_or(0));
    Dataset::new(samples, classes)
}
