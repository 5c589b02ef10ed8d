//! TOML experiment configuration.
//!
//! Every section except `[dataset]` and the top-level `seed` has defaults;
//! omitted keys take the values documented on each field. All stage seeds are
//! derived from `seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::NnAttackConfig;
use crate::clmia::{AttackArch, ContrastiveConfig, FinetuneConfig};
use crate::data::{Ratio, SplitConfig, SyntheticConfig};
use crate::error::{Error, Result};
use crate::nn::{Activation, GradReduction, NetworkSpec};
use crate::seed::{self, stream};
use crate::target::{ClassifierTraining, ViewMode};

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; required.
    pub seed: u64,
    /// Default output directory (overridden by `--out`). Not part of the hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub baselines: BaselinesConfig,
    #[serde(default)]
    pub ablation: AblationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Gaussian class blobs. `n` samples form the member/non-member pool and
    /// `aux` further samples feed the NN attack's shadow model.
    Synthetic {
        n: usize,
        classes: usize,
        dim: usize,
        separation: f64,
        #[serde(default)]
        aux: usize,
    },
    /// Labeled posterior dump of an external target (rows carry member bits).
    Dump { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub reduction: GradReduction,
    pub momentum: f64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig {
            hidden: vec![128, 128],
            activation: Activation::Relu,
            epochs: 200,
            learning_rate: 0.05,
            batch_size: 32,
            reduction: GradReduction::Mean,
            momentum: 0.0,
        }
    }
}

impl TargetConfig {
    pub fn training(&self) -> ClassifierTraining {
        ClassifierTraining {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            reduction: self.reduction,
            momentum: self.momentum,
        }
    }

    pub fn spec(&self, input: usize, classes: usize, seed_value: u64) -> NetworkSpec {
        let mut sizes = vec![input];
        sizes.extend(&self.hidden);
        sizes.push(classes);
        NetworkSpec::mlp(&sizes, self.activation, seed_value)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub temperature: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub d1: f64,
    pub d2: f64,
    pub view_mode: ViewMode,
    pub features_after_dropout: bool,
    pub normalize_features: bool,
    pub symmetric_loss: bool,
    pub resample_views: bool,
    pub reduction: GradReduction,
    pub momentum: f64,
    pub encoder_hidden: Vec<usize>,
    pub projection_dim: usize,
    pub head_hidden: Vec<usize>,
    pub finetune: FinetuneSection,
}

impl Default for AttackConfig {
    fn default() -> Self {
        let c = ContrastiveConfig::default();
        let a = AttackArch::default();
        AttackConfig {
            temperature: c.temperature,
            batch_size: c.batch_size,
            epochs: c.epochs,
            learning_rate: c.learning_rate,
            d1: c.d1,
            d2: c.d2,
            view_mode: c.view_mode,
            features_after_dropout: c.features_after_dropout,
            normalize_features: c.normalize_features,
            symmetric_loss: c.symmetric_loss,
            resample_views: c.resample_views,
            reduction: c.reduction,
            momentum: c.momentum,
            encoder_hidden: a.encoder_hidden,
            projection_dim: a.projection_dim,
            head_hidden: a.head_hidden,
            finetune: FinetuneSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneSection {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub reduction: GradReduction,
    pub momentum: f64,
    pub zero_init_head: bool,
}

impl Default for FinetuneSection {
    fn default() -> Self {
        let f = FinetuneConfig::default();
        FinetuneSection {
            epochs: f.epochs,
            learning_rate: f.learning_rate,
            batch_size: f.batch_size,
            reduction: f.reduction,
            momentum: f.momentum,
            zero_init_head: f.zero_init_head,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselinesConfig {
    /// Threshold and correctness attacks.
    pub enabled: bool,
    /// Single-shadow neural attack (needs `dataset.aux > 0`).
    pub nn_attack: bool,
    /// Head trained directly on the feature vector, no encoder.
    pub only_fc: bool,
    pub nn_hidden: Vec<usize>,
    pub nn_epochs: usize,
    pub nn_learning_rate: f64,
    pub nn_batch_size: usize,
}

impl Default for BaselinesConfig {
    fn default() -> Self {
        let nn = NnAttackConfig::default();
        BaselinesConfig {
            enabled: true,
            nn_attack: true,
            only_fc: true,
            nn_hidden: nn.hidden,
            nn_epochs: nn.training.epochs,
            nn_learning_rate: nn.training.learning_rate,
            nn_batch_size: nn.training.batch_size,
        }
    }
}

impl BaselinesConfig {
    pub fn nn_config(&self) -> NnAttackConfig {
        NnAttackConfig {
            hidden: self.nn_hidden.clone(),
            training: ClassifierTraining {
                epochs: self.nn_epochs,
                learning_rate: self.nn_learning_rate,
                batch_size: self.nn_batch_size,
                ..ClassifierTraining::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub temperatures: Vec<f64>,
    /// `[d1, d2]` pairs.
    pub dropout: Vec<[f64; 2]>,
    /// Labeled-set sizes; unset means `split.labeled_count` only.
    pub labeled_sizes: Option<Vec<usize>>,
    /// Labeled member ratios; unset means `split.labeled_ratio` only.
    pub ratios: Option<Vec<Ratio>>,
    /// Add an Only-FC cell for every labeled-set cell.
    pub only_fc: bool,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            temperatures: vec![0.05],
            dropout: vec![[0.1, 0.1]],
            labeled_sizes: None,
            ratios: None,
            only_fc: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| config_err(e.to_string());
        match &self.dataset {
            DatasetConfig::Synthetic { n, classes, dim, separation, .. } => {
                if *classes < 2 || *dim == 0 || *n < *classes || separation.is_nan() || *separation < 0.0 {
                    return Err(config_err(
                        "synthetic dataset needs classes >= 2, dim >= 1, n >= classes, separation >= 0",
                    ));
                }
            }
            DatasetConfig::Dump { .. } => {
                if self.attack.view_mode == ViewMode::NetworkDropout {
                    return Err(config_err(
                        "dump datasets have no target network; use view_mode = \"posterior_dropout\"",
                    ));
                }
            }
        }
        if self.target.hidden.contains(&0) || self.attack.encoder_hidden.contains(&0) {
            return Err(config_err("layer widths must be positive"));
        }
        if self.attack.encoder_hidden.is_empty() {
            return Err(config_err("attack.encoder_hidden must name at least one layer"));
        }
        if self.target.batch_size == 0 || self.attack.finetune.batch_size == 0 {
            return Err(config_err("batch sizes must be positive"));
        }
        self.contrastive().validate().map_err(wrap)?;
        if self.split.labeled_count == 0 || self.split.target_count == 0 {
            return Err(config_err("split.labeled_count and split.target_count must be positive"));
        }
        let a = &self.ablation;
        if a.temperatures.is_empty() || a.dropout.is_empty() {
            return Err(config_err("ablation grids must not be empty"));
        }
        if a.labeled_sizes.as_ref().is_some_and(|v| v.is_empty() || v.contains(&0))
            || a.ratios.as_ref().is_some_and(Vec::is_empty)
        {
            return Err(config_err("ablation labeled_sizes/ratios must be non-empty when set"));
        }
        for t in &a.temperatures {
            if !(t.is_finite() && *t > 0.0) {
                return Err(config_err(format!("ablation temperature {t} must be positive")));
            }
        }
        for [d1, d2] in &a.dropout {
            crate::nn::check_rate(*d1).map_err(wrap)?;
            crate::nn::check_rate(*d2).map_err(wrap)?;
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, with `output_dir` excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn stage_seed(&self, stream_id: u64) -> u64 {
        seed::derive(self.seed, stream_id, 0)
    }

    pub fn contrastive(&self) -> ContrastiveConfig {
        let a = &self.attack;
        ContrastiveConfig {
            temperature: a.temperature,
            batch_size: a.batch_size,
            epochs: a.epochs,
            learning_rate: a.learning_rate,
            d1: a.d1,
            d2: a.d2,
            view_mode: a.view_mode,
            features_after_dropout: a.features_after_dropout,
            normalize_features: a.normalize_features,
            symmetric_loss: a.symmetric_loss,
            resample_views: a.resample_views,
            reduction: a.reduction,
            momentum: a.momentum,
            seed: self.stage_seed(stream::CONTRASTIVE),
        }
    }

    pub fn arch(&self) -> AttackArch {
        AttackArch {
            encoder_hidden: self.attack.encoder_hidden.clone(),
            projection_dim: self.attack.projection_dim,
            head_hidden: self.attack.head_hidden.clone(),
        }
    }

    pub fn finetune(&self) -> FinetuneConfig {
        let f = &self.attack.finetune;
        FinetuneConfig {
            epochs: f.epochs,
            learning_rate: f.learning_rate,
            batch_size: f.batch_size,
            reduction: f.reduction,
            momentum: f.momentum,
            zero_init_head: f.zero_init_head,
            seed: self.stage_seed(stream::FINETUNE),
        }
    }

    pub fn synthetic(&self) -> Option<(SyntheticConfig, usize)> {
        match &self.dataset {
            DatasetConfig::Synthetic { n, classes, dim, separation, aux } => Some((
                SyntheticConfig {
                    n: n + aux,
                    classes: *classes,
                    dim: *dim,
                    separation: *separation,
                },
                *aux,
            )),
            DatasetConfig::Dump { .. } => None,
        }
    }
}
