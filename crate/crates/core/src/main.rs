use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pcosync::cli::run::{run_batch, run_to_dir, write_batch, RunError};
use pcosync::cli::{load_config, load_preset, parse_pi_expr, RunConfig, PRESETS};
use pcosync::PiSelection;

#[derive(Parser)]
#[command(name = "pcosync", version, about = "Pulse-coupled oscillator synchronization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration and write CSV artifacts.
    Run {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Simulate many random initial conditions in parallel.
    Batch {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        /// Number of runs (defaults to the config's batch.count).
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Parse and check a configuration without running it.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// Built-in example configurations.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset's TOML.
    Show { name: String },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct Overrides {
    /// Seed for random initial phases (base seed for batches).
    #[arg(long)]
    seed: Option<u64>,
    /// Horizon in seconds; accepts expressions such as `100` or `20pi`.
    #[arg(long, value_parser = parse_num)]
    t_end: Option<f64>,
    /// Record samples every `dt` seconds in addition to event states.
    #[arg(long, value_name = "DT", value_parser = parse_num)]
    dense: Option<f64>,
    #[arg(long, value_parser = parse_selection)]
    pi_selection: Option<PiSelection>,
}

fn parse_num(s: &str) -> Result<f64, String> {
    parse_pi_expr(s).ok_or_else(|| format!("cannot read {s:?} as a number"))
}

fn parse_selection(s: &str) -> Result<PiSelection, String> {
    match s {
        "delay" => Ok(PiSelection::Delay),
        "advance" => Ok(PiSelection::Advance),
        _ => Err("expected `delay` or `advance`".into()),
    }
}

fn load(source: &Source) -> Result<RunConfig, RunError> {
    Ok(match (&source.config, &source.preset) {
        (Some(path), _) => load_config(path)?,
        (None, Some(name)) => load_preset(name)?,
        (None, None) => unreachable!("clap requires one source"),
    })
}

fn apply(mut cfg: RunConfig, o: &Overrides) -> RunConfig {
    if let Some(seed) = o.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(t) = o.t_end {
        cfg = cfg.with_t_end(t);
    }
    if let Some(dt) = o.dense {
        cfg = cfg.with_dense(dt);
    }
    if let Some(sel) = o.pi_selection {
        cfg = cfg.with_pi_selection(sel);
    }
    cfg
}

fn execute(command: Command) -> Result<u8, RunError> {
    match command {
        Command::Run {
            source,
            overrides,
            out_dir,
        } => {
            let cfg = apply(load(&source)?, &overrides);
            cfg.params.validate()?;
            let summary = run_to_dir(&cfg, &out_dir)?;
            for (k, v) in summary.rows() {
                println!("{k:<24} {v}");
            }
            println!("artifacts in {}", out_dir.display());
            let failures = summary.invariant_failures();
            for f in &failures {
                eprintln!("invariant failure: {f}");
            }
            Ok(if failures.is_empty() { 0 } else { 2 })
        }
        Command::Batch {
            source,
            overrides,
            count,
            out_dir,
        } => {
            let cfg = apply(load(&source)?, &overrides);
            cfg.params.validate()?;
            let batch = cfg.batch;
            let count = count.or(batch.map(|b| b.count)).unwrap_or(100);
            let base = overrides
                .seed
                .or(batch.map(|b| b.base_seed))
                .unwrap_or(0);
            let report = run_batch(&cfg, count, base)?;
            write_batch(&report, &out_dir)?;
            for (k, v) in report.summary_rows() {
                println!("{k:<24} {v}");
            }
            println!("artifacts in {}", out_dir.display());
            let failures = report.failures();
            for f in &failures {
                eprintln!("failure: {f}");
            }
            Ok(if failures.is_empty() { 0 } else { 2 })
        }
        Command::Validate { source } => {
            let cfg = load(&source)?;
            println!(
                "ok: {} ({} oscillators, {}, t_end {})",
                cfg.name,
                cfg.n(),
                cfg.network.topology().kind(),
                cfg.params.t_end
            );
            Ok(0)
        }
        Command::Preset { action } => {
            match action {
                PresetAction::List => {
                    for p in PRESETS {
                        println!("{:<18} {}", p.name, p.summary);
                    }
                }
                PresetAction::Show { name } => match pcosync::cli::find_preset(&name) {
                    Some(p) => print!("{}", p.toml),
                    None => {
                        eprintln!("unknown preset {name:?}");
                        return Ok(1);
                    }
                },
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
