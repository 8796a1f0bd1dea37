//! `lorafp`: run the experiments of a plan file.
//!
//! Every subcommand takes the plan path and any number of `--set key=value`
//! overrides. Failures print one `ERROR\t<code>\t<message>` line on stderr
//! and exit with status 1.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lorafp_core::cnn::{evaluate, load_checkpoint};
use lorafp_core::experiment::{load_scenario_frames, Axis, Experiment, ExperimentPlan};
use lorafp_core::{BandMode, Error, Representation};
use serde_json::json;

#[derive(Parser)]
#[command(name = "lorafp", version, about = "LoRa RF-fingerprinting experiments")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PlanArgs {
    /// Plan file (TOML).
    plan: PathBuf,
    /// Override a plan value, e.g. `--set schedule.max_epochs=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct ModelArgs {
    /// Scenario id; defaults to the plan's first scenario.
    #[arg(long)]
    scenario: Option<String>,
    /// `iq` or `fft`; defaults to the plan's capture setting.
    #[arg(long)]
    representation: Option<Representation>,
    /// `in_band_only` or `in_band_plus_oob`; defaults to the plan's capture setting.
    #[arg(long)]
    band_mode: Option<BandMode>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the device population and every scenario dataset.
    Generate(PlanArgs),
    /// Train one model and report its held-out test accuracy.
    Train {
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Repetition index selecting the training seeds.
        #[arg(long, default_value_t = 0)]
        rep: u32,
    },
    /// Evaluate a checkpoint on every frame of a scenario.
    Evaluate {
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train/test accuracy matrices across scenario axes.
    CrossEval {
        #[command(flatten)]
        plan: PlanArgs,
        /// Only the matrices on this axis (`day`, `location`, `config`, `receiver`).
        #[arg(long, value_parser = parse_axis)]
        axis: Option<Axis>,
    },
    /// In-band only versus in-band plus out-of-band, for each representation.
    OobCompare(PlanArgs),
    /// Spectrum tables for configurations and phase-noise levels.
    Spectra(PlanArgs),
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    match s {
        "day" => Ok(Axis::Day),
        "location" => Ok(Axis::Location),
        "config" => Ok(Axis::Config),
        "receiver" => Ok(Axis::Receiver),
        other => Err(format!("unknown axis {other:?}")),
    }
}

fn load(args: &PlanArgs) -> lorafp_core::Result<ExperimentPlan> {
    ExperimentPlan::load(&args.plan, &args.overrides)
}

fn selection(plan: &ExperimentPlan, m: &ModelArgs) -> (String, Representation, BandMode) {
    (
        m.scenario.clone().unwrap_or_else(|| plan.scenarios[0].id.clone()),
        m.representation.unwrap_or(plan.capture.representation),
        m.band_mode.unwrap_or(plan.capture.band_mode),
    )
}

fn run(cli: Cli) -> lorafp_core::Result<()> {
    match cli.command {
        Command::Generate(args) => {
            let mut ex = Experiment::generate(load(&args)?)?;
            let out = ex.write_manifest()?;
            println!("{}", out.display());
        }
        Command::Train { plan, model, rep } => {
            let plan = load(&plan)?;
            let (scenario, repr, band) = selection(&plan, &model);
            let mut ex = Experiment::open(plan, "train")?;
            let run = ex.trained(&scenario, repr, band, rep)?;
            let summary = json!({
                "run": run.key,
                "best_epoch": run.best_epoch,
                "test_accuracy": run.test.accuracy,
                "test_loss": run.test.loss,
                "test_frames": run.test.frames(),
                "split_sizes": [run.split_sizes.0, run.split_sizes.1, run.split_sizes.2],
                "parameters": run.model.parameter_count(),
            });
            println!("{}\t{}", run.key.stem(), run.test.accuracy);
            let name = format!("train_{}.json", run.key.stem());
            let path = ex.plan.results_dir().join(name);
            ex.emit_json(&path, &summary)?;
            ex.write_manifest()?;
        }
        Command::Evaluate { plan, model, checkpoint } => {
            let plan = load(&plan)?;
            let (scenario, repr, band) = selection(&plan, &model);
            let mut ex = Experiment::open(plan, "evaluate")?;
            let ck = load_checkpoint(&checkpoint)?;
            let frames = load_scenario_frames(&ex.plan, &scenario, repr, band)?;
            let e = evaluate(&ck.model, &frames)?;
            let stem = checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
            let path = ex.plan.results_dir().join(format!("eval_{stem}_on_{scenario}_{repr}_{band}.json"));
            println!("{stem}\t{scenario}\t{}", e.accuracy);
            let summary = json!({
                "checkpoint": checkpoint,
                "scenario": scenario,
                "representation": repr,
                "band_mode": band,
                "accuracy": e.accuracy,
                "loss": e.loss,
                "frames": e.frames(),
                "confusion": e.confusion,
            });
            ex.emit_json(&path, &summary)?;
            ex.write_manifest()?;
        }
        Command::CrossEval { plan, axis } => {
            let mut ex = Experiment::open(load(&plan)?, "cross-eval")?;
            for m in ex.cross_eval(axis)? {
                let off = m.off_diagonal_mean().map_or("-".to_string(), |v| format!("{v:.4}"));
                println!("{}\tdiagonal {:.4}\toff-diagonal {off}", m.stem(), m.diagonal_mean());
            }
            ex.write_manifest()?;
        }
        Command::OobCompare(args) => {
            let mut ex = Experiment::open(load(&args)?, "oob-compare")?;
            let report = ex.oob_comparison()?;
            for r in &report.rows {
                println!("{}\t{}\tr{}\t{:.4}", r.representation, r.band_mode, r.rep, r.accuracy);
            }
            ex.write_manifest()?;
        }
        Command::Spectra(args) => {
            let plan = load(&args)?;
            let mut ex = Experiment::open(plan, "spectra")?;
            for s in ex.export_spectra()? {
                println!("{}\t{:.2} dB", s.path.display(), s.oob_ratio_db);
            }
            ex.write_manifest()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERROR\t{}\t{}", e.code(), one_line(&e));
            ExitCode::FAILURE
        }
    }
}

fn one_line(e: &Error) -> String {
    e.to_string().replace(['\n', '\t'], " ")
}
