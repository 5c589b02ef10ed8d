//! The contrastive membership-inference attack.

mod loss;
mod model;
mod train;
mod views;

pub use loss::{cosine_sim, nt_xent, NtXent};
pub use model::{
    load_attack_model, read_attack_model, save_attack_model, write_attack_model, AttackModel,
    MembershipDecision, ATTACK_MAGIC, DEFAULT_THRESHOLD,
};
pub use train::{
    finetune, head_accuracy, train_encoder, train_encoder_on_pairs, view_mode_name, AttackArch, ContrastiveConfig,
    FinetuneConfig,
};
pub use views::{
    attack_data_dump, attack_data_from_dump, make_attack_data, make_views, view_rng, ViewPair,
};
