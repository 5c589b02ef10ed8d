//! Trains an overfit target classifier on a synthetic Gaussian mixture and
//! prints its train/test accuracy gap, the signal membership inference feeds on.
//!
//! cargo run --release --example target_overfit

use clmia::data::{gen_synthetic, split_membership, SplitConfig};
use clmia::nn::{Activation, NetworkSpec};
use clmia::seed::{derive, stream};
use clmia::target::{train_target, ClassifierTraining};

fn main() -> clmia::Result<()> {
    let seed = 11;
    let data = gen_synthetic(1600, 10, 32, 3.0, seed)?;
    let split = split_membership(data.samples(), &SplitConfig::default(), seed)?;
    println!(
        "members {} / non-members {} / D_t {} / D_l {}",
        split.train_members.len(),
        split.non_members.len(),
        split.target.len(),
        split.labeled.len()
    );

    let spec = NetworkSpec::mlp(&[32, 128, 128, 10], Activation::Relu, derive(seed, stream::TARGET_INIT, 0));
    let (_, profile) = train_target(&split.train_members, &split.non_members, spec, &ClassifierTraining::default())?;
    println!(
        "train accuracy {:.3}, test accuracy {:.3}, gap {:.3}, final loss {:.2e}",
        profile.train_accuracy,
        profile.test_accuracy,
        profile.gap(),
        profile.final_train_loss
    );
    Ok(())
}
