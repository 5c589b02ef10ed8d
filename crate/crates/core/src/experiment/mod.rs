//! Configuration-driven experiment runs.

mod ablation;
pub mod commands;
mod config;
mod manifest;
mod pipeline;

pub use ablation::{cell_count, labeled_cells, run_ablation, AblationOutput, LabeledCell, ABLATION_REPORTS};
pub use config::{
    AblationConfig, AttackConfig, BaselinesConfig, DatasetConfig, ExperimentConfig, FinetuneSection,
    TargetConfig,
};
pub use manifest::{RunManifest, StageRecord, StageRunner};
pub use pipeline::{
    attack_outcome, baseline_outcomes, files, finetune_attack, inference_text, labeled_pairs,
    load_attack, load_network, load_target, prepare_data, prepare_data_with_split, run_experiment,
    save_network, split_posteriors, train_attack_encoder, train_only_fc, train_target_model,
    write_reports, PreparedData, RunOutput, CLMIA, ONLY_FC,
};
