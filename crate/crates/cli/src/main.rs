use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use wbreact_core::builtin::icub_like_model;
use wbreact_core::controller::ControllerConfig;
use wbreact_core::kinematics::Side;
use wbreact_core::sim::{self, Overrides, RunOptions, Scenario};

#[derive(Parser)]
#[command(name = "wbreact", version, about = "Reactive whole-body QP controller: scenario simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write metrics.csv and summary.toml.
    Run {
        scenario: PathBuf,
        /// Robot model file, overriding the scenario's reference.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Controller config file, overriding the scenario's reference.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Stop after N ticks.
        #[arg(long)]
        ticks: Option<u64>,
        /// Write the QP of tick 0 and of every fallback tick under OUT/qp/.
        #[arg(long)]
        dump_qp: bool,
    },
    /// Print (or write) one of the bundled experiment scenarios.
    GenExp {
        #[arg(value_parser = sim::EXPERIMENTS)]
        experiment: String,
        /// Write to this file instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Recompute the summary of a metrics CSV.
    Summarize {
        metrics: PathBuf,
        /// Arm whose tracking error is split by proximity episodes.
        #[arg(long, default_value = "right")]
        primary: String,
    },
    /// Write the bundled model and default controller config as TOML.
    GenModel {
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(scenario_path: &Path, overrides: Overrides, out: &Path, options: RunOptions) -> Result<bool> {
    let scenario = Scenario::load(scenario_path)?;
    let base = scenario_path.parent();
    let started = std::time::Instant::now();
    let result = sim::run_scenario(&scenario, base, &overrides, &options)?;
    let elapsed = started.elapsed();

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut csv = Vec::new();
    sim::write_csv(&mut csv, &result.ticks)?;
    fs::write(out.join("metrics.csv"), csv)?;
    if let Some(summary) = &result.summary {
        write(&out.join("summary.toml"), &summary.to_toml_string()?)?;
        println!(
            "{}: {} ticks in {:.2} s, reach {}/{}, solver success {:.4}, min obstacle distance {}",
            scenario.name,
            summary.ticks,
            elapsed.as_secs_f64(),
            summary.targets_reached,
            summary.targets_total,
            summary.solver_success_fraction,
            summary.min_obstacle_distance
        );
    }
    let mut seen = std::collections::HashMap::new();
    for (tick, text) in &result.qp_dumps {
        let n = seen.entry(*tick).or_insert(0);
        let name = if *n == 0 { format!("tick_{tick:06}.txt") } else { format!("tick_{tick:06}_{n}.txt") };
        *n += 1;
        write(&out.join("qp").join(name), text)?;
    }
    match &result.error {
        Some(e) => {
            eprintln!("error: {e}");
            Ok(false)
        }
        None => Ok(true),
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<bool> {
    match Cli::parse().command {
        Command::Run { scenario, model, config, out, ticks, dump_qp } => {
            run(&scenario, Overrides { model, config }, &out, RunOptions { ticks, capture_qp: dump_qp })
        }
        Command::GenExp { experiment, output } => {
            let text = sim::experiment(&experiment)?.to_toml_string()?;
            match output {
                Some(path) => write(&path, &text)?,
                None => print!("{text}"),
            }
            Ok(true)
        }
        Command::Summarize { metrics, primary } => {
            let primary = match primary.as_str() {
                "left" => Side::Left,
                "right" => Side::Right,
                other => bail!("--primary must be left or right, got {other:?}"),
            };
            let file = fs::File::open(&metrics).with_context(|| format!("opening {}", metrics.display()))?;
            let ticks = sim::read_csv(file)?;
            print!("{}", sim::summarize(&ticks, primary)?.to_toml_string()?);
            Ok(true)
        }
        Command::GenModel { out } => {
            write(&out.join("icub_like.toml"), &icub_like_model().to_toml_string())?;
            write(&out.join("default_config.toml"), &ControllerConfig::default().to_toml_string())?;
            Ok(true)
        }
    }
}
