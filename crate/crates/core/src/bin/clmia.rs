use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use clmia::experiment::{commands, run_ablation, run_experiment, ExperimentConfig};
use clmia::metrics::AttackReport;
use clmia::{Error, Result};

#[derive(Parser)]
#[command(version, about = "Contrastive membership-inference experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the target classifier and write its checkpoint and profile.
    TrainTarget(Common),
    /// Write posterior dumps of the target set and the labeled set.
    DumpPosteriors {
        #[command(flatten)]
        common: Common,
        /// Dump a shadow (1 or 2) on the target set instead.
        #[arg(long)]
        shadow: Option<usize>,
    },
    /// Write the attack set of dropout view pairs.
    MakeAttackData(Common),
    /// Contrastive training of the attack encoder.
    TrainClmia {
        #[command(flatten)]
        common: Common,
        /// Train on this attack-data file instead of regenerating views.
        #[arg(long)]
        attack_data: Option<PathBuf>,
    },
    /// Fine-tune the classification head on the labeled set.
    Finetune(Common),
    /// Score a posterior dump with the fine-tuned attack.
    Infer {
        #[command(flatten)]
        common: Common,
        /// Posterior dump to score (default: the target-set dump).
        #[arg(long)]
        posteriors: Option<PathBuf>,
    },
    /// Run the comparison attacks.
    Baselines(Common),
    /// Full pipeline.
    Run(Common),
    /// Ablation grid sweep.
    Ablate(Common),
}

fn setup(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let cfg = ExperimentConfig::load(&common.config)?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))?;
    std::fs::create_dir_all(&out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    Ok((cfg, out))
}

fn print_reports(reports: &[AttackReport]) {
    for r in reports {
        println!(
            "{:<18} balanced_accuracy={:.4} f1={:.4} auc={:.4}",
            r.attack, r.balanced_accuracy, r.f1, r.auc
        );
    }
}

fn print_history(label: &str, history: &[f64]) {
    if let (Some(first), Some(last)) = (history.first(), history.last()) {
        println!("{label}: {} epochs, loss {first:.4} -> {last:.4}", history.len());
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::TrainTarget(c) => {
            let (cfg, out) = setup(&c)?;
            let p = commands::train_target_cmd(&cfg, &out)?;
            println!(
                "train_accuracy={:.4} test_accuracy={:.4} gap={:.4}",
                p.train_accuracy,
                p.test_accuracy,
                p.gap()
            );
        }
        Command::DumpPosteriors { common, shadow } => {
            let (cfg, out) = setup(&common)?;
            for f in commands::dump_posteriors_cmd(&cfg, &out, shadow)? {
                println!("{}", out.join(f).display());
            }
        }
        Command::MakeAttackData(c) => {
            let (cfg, out) = setup(&c)?;
            println!("{} view pairs", commands::make_attack_data_cmd(&cfg, &out)?);
        }
        Command::TrainClmia { common, attack_data } => {
            let (cfg, out) = setup(&common)?;
            let h = commands::train_clmia_cmd(&cfg, &out, attack_data.as_deref())?;
            print_history("contrastive", &h);
        }
        Command::Finetune(c) => {
            let (cfg, out) = setup(&c)?;
            print_history("finetune", &commands::finetune_cmd(&cfg, &out)?);
        }
        Command::Infer { common, posteriors } => {
            let (cfg, out) = setup(&common)?;
            if let Some(r) = commands::infer_cmd(&cfg, &out, posteriors.as_deref())? {
                print_reports(&[r]);
            }
        }
        Command::Baselines(c) => {
            let (cfg, out) = setup(&c)?;
            print_reports(&commands::baselines_cmd(&cfg, &out)?);
        }
        Command::Run(c) => {
            let (cfg, out) = setup(&c)?;
            print_reports(&run_experiment(&cfg, &out)?.reports);
        }
        Command::Ablate(c) => {
            let (cfg, out) = setup(&c)?;
            let res = run_ablation(&cfg, &out)?;
            for r in &res.reports {
                let cell: Vec<String> = r.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!("{:<8} {} balanced_accuracy={:.4}", r.attack, cell.join(" "), r.balanced_accuracy);
            }
            println!("{}", Path::new(&out).join(clmia::experiment::ABLATION_REPORTS).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
