//! Attacking a model that lives elsewhere: its posteriors arrive as a dump
//! file and the whole pipeline runs on them.
//!
//! cargo run --release --example posterior_dump

use clmia::data::{write_posterior_dump, PosteriorDump, PosteriorRow};
use clmia::experiment::{run_experiment, ExperimentConfig};
use rand::Rng;

fn main() -> clmia::Result<()> {
    let dir = std::env::temp_dir().join("clmia-posterior-dump");
    std::fs::create_dir_all(&dir).map_err(|e| clmia::Error::Io { path: dir.clone(), source: e })?;

    // Stand-in for an external overfit model: members are confidently right.
    let classes = 10;
    let mut rng = clmia::seed::rng(21);
    let mut dump = PosteriorDump::new(classes, true);
    for i in 0..2000 {
        let member = i % 2 == 0;
        let label = rng.random_range(0..classes);
        let peak = if member { rng.random_range(3.0..9.0) } else { rng.random_range(0.0..6.0) };
        let logits: Vec<f64> = (0..classes)
            .map(|c| if c == label { peak } else { rng.random_range(-1.0..1.5) })
            .collect();
        dump.rows.push(PosteriorRow { probs: clmia::nn::softmax(&logits), label, member: Some(member) });
    }
    let path = dir.join("external.csv");
    write_posterior_dump(&dump, &path)?;
    println!("{}", dump.to_text().lines().take(4).collect::<Vec<_>>().join("\n"));

    let cfg = ExperimentConfig::from_toml(&format!(
        r#"
        seed = 3
        [dataset]
        kind = "dump"
        path = "{}"
        [split]
        target_count = 800
        labeled_count = 600
        "#,
        path.display()
    ))?;
    for r in run_experiment(&cfg, &dir.join("run"))?.reports {
        println!("{:<17} balanced accuracy {:.4}  AUC {:.4}", r.attack, r.balanced_accuracy, r.auc);
    }
    Ok(())
}
