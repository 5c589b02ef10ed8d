//! A small ablation sweep from a TOML config: one target model, encoders per
//! temperature, fine-tuning per labeled-set size, with the Only-FC control.
//!
//! cargo run --release --example ablation_grid

use clmia::experiment::{cell_count, run_ablation, ExperimentConfig};

const CONFIG: &str = r#"
seed = 2

[dataset]
kind = "synthetic"
n = 2000
classes = 10
dim = 32
separation = 3.0

[target]
epochs = 100

[attack]
epochs = 20

[ablation]
temperatures = [0.05, 0.5]
labeled_sizes = [200, 600]
only_fc = true
"#;

fn main() -> clmia::Result<()> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    println!("{} cells", cell_count(&cfg));
    let out = std::env::temp_dir().join("clmia-ablation");
    let res = run_ablation(&cfg, &out)?;
    for r in &res.reports {
        let cell: Vec<String> = r.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("{:<8} {:<55} BA {:.4}", r.attack, cell.join(" "), r.balanced_accuracy);
    }
    for s in &res.manifest.stages {
        println!("stage {:<13} {:.2}s", s.name, s.seconds);
    }
    Ok(())
}
