//! Metric-based attacks on externally supplied posteriors: each statistic's
//! threshold is calibrated on a labeled subset and applied to held-out rows.
//!
//! cargo run --example threshold_baselines

use clmia::baselines::{correctness_outcome, StatisticKind, ThresholdAttack};
use clmia::metrics::balanced_accuracy;
use rand::Rng;

/// Members get confident, mostly correct posteriors; non-members flatter ones.
fn fake_row(rng: &mut impl Rng, member: bool) -> (Vec<f64>, usize) {
    let classes = 5;
    let y = rng.random_range(0..classes);
    let peak = if member { rng.random_range(2.0..6.0) } else { rng.random_range(0.0..3.0) };
    let logits: Vec<f64> = (0..classes)
        .map(|c| if c == y { peak } else { rng.random_range(-1.0..1.0) })
        .collect();
    (clmia::nn::softmax(&logits), y)
}

fn main() -> clmia::Result<()> {
    let mut rng = clmia::seed::rng(3);
    let truth: Vec<bool> = (0..600).map(|i| i % 2 == 0).collect();
    let rows: Vec<(Vec<f64>, usize)> = truth.iter().map(|&m| fake_row(&mut rng, m)).collect();
    let (calib, eval) = rows.split_at(200);
    let (calib_truth, eval_truth) = truth.split_at(200);

    for kind in StatisticKind::ALL {
        let attack = ThresholdAttack::calibrate(kind, calib, calib_truth)?;
        let outcome = attack.outcome(eval)?;
        println!(
            "{:<17} tau {:>9.5}  calibration BA {:.3}  held-out BA {:.3}",
            kind.name(),
            attack.threshold,
            attack.calibration_accuracy,
            balanced_accuracy(&outcome.decisions, eval_truth)?
        );
    }
    let correct = correctness_outcome(eval)?;
    println!("correctness       held-out BA {:.3}", balanced_accuracy(&correct.decisions, eval_truth)?);
    Ok(())
}
