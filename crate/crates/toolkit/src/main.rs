use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use duck_toolkit::cache::{load_model, save_model};
use duck_toolkit::report::emit_report;
use duck_toolkit::{load_config, prepare, run_stage, ExperimentConfig, Method, ReportFormat, Stage};

/// Machine unlearning experiments on feedforward classifiers.
#[derive(Parser)]
#[command(name = "duck", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train (or load from cache) the original model and save it to --out.
    Train(Flags),
    /// Unlearn every run of the config and report accuracies and AUS.
    Unlearn(Flags),
    /// Report accuracies and AUS of the original model on every split.
    Evaluate(Flags),
    /// Run the membership inference attack against the original model.
    Mia(Flags),
    /// Full pipeline: unlearn, evaluate, and attack when enabled.
    Experiment(Flags),
}

/// Flags override the matching config keys.
#[derive(Args)]
struct Flags {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Single run seed, replacing `seeds`. For `train`, the model seed.
    #[arg(long)]
    seed: Option<u64>,
    /// duck, retrain, finetune, neg_grad or rand_label.
    #[arg(long)]
    method: Option<Method>,
    /// json or csv.
    #[arg(long)]
    format: Option<ReportFormat>,
    /// Report path (`train`: model path). Reports go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run seeds concurrently.
    #[arg(long)]
    parallel: bool,
    /// Saved model to use instead of training the original.
    #[arg(long)]
    model: Option<PathBuf>,
}

fn apply(flags: &Flags, train: bool) -> Result<ExperimentConfig> {
    let mut cfg = load_config(&flags.config)?;
    if let Some(seed) = flags.seed {
        if train {
            cfg.model.seed = seed;
        } else {
            cfg.seeds = vec![seed];
        }
    }
    if let Some(m) = flags.method {
        cfg.method = m;
    }
    if let Some(f) = flags.format {
        cfg.format = f;
    }
    if let Some(o) = &flags.out {
        cfg.output = Some(o.clone());
    }
    cfg.parallel |= flags.parallel;
    // Re-check: a flag may have made the config inconsistent.
    Ok(cfg.finalize()?)
}

fn train(flags: &Flags) -> Result<ExitCode> {
    let cfg = apply(flags, true)?;
    let out = flags.out.clone().unwrap_or_else(|| PathBuf::from("original.duckmodel"));
    let p = prepare(&cfg, None)?;
    save_model(&p.original, &out)?;
    let summary = serde_json::json!({
        "model": out.display().to_string(),
        "train_accuracy": duck_toolkit::report::round(p.original_train_accuracy),
        "test_accuracy": duck_toolkit::report::round(p.original_test_accuracy),
        "cache": format!("{:?}", p.cache),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(ExitCode::SUCCESS)
}

fn staged(flags: &Flags, stage: Stage) -> Result<ExitCode> {
    let cfg = apply(flags, false)?;
    let original = flags
        .model
        .as_deref()
        .map(|p| load_model(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    let report = run_stage(&cfg, stage, original)?;
    if let Some(text) = emit_report(&report, cfg.format, cfg.output.as_deref())? {
        print!("{text}");
    }
    let ok = report.runs_ok();
    log::info!("{ok} of {} runs succeeded", report.runs.len());
    Ok(if ok == 0 { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(f) => train(f),
        Command::Unlearn(f) => staged(f, Stage::Unlearn),
        Command::Evaluate(f) => staged(f, Stage::Evaluate),
        Command::Mia(f) => staged(f, Stage::Mia),
        Command::Experiment(f) => staged(f, Stage::Experiment),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
