use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use eans_core::harness::{self, BatchSpec, ScenarioEntry, TraceKind, SKIPPED};
use eans_core::world::{generate_scenario, presets, GenParams};
use eans_core::{Error, MissionConfig, StrategyMode};

const EXIT_USAGE: u8 = 1;
const EXIT_COLLISION: u8 = 2;

#[derive(Parser)]
#[command(
    name = "eans",
    version,
    about = "Closed-loop simulator for environment-adaptive UAV navigation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario x mode x seed mission and write metrics and logs.
    Run(RunArgs),
    /// Run uniform fields over a list of obstacle densities.
    Sweep(SweepArgs),
    /// Export a plotting trace from a mission log.
    Trace(TraceArgs),
    /// Inspect the mission configuration.
    #[command(subcommand)]
    Config(ConfigCommand),
    /// Generate scenario files.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
}

#[derive(Args)]
struct Common {
    /// Strategy modes (baseline, lookup-table, eans); all three when omitted.
    #[arg(long = "mode", value_delimiter = ',')]
    modes: Vec<String>,
    /// Missions per scenario and mode.
    #[arg(long, default_value_t = 5)]
    replicates: u64,
    /// First seed; replicates use consecutive seeds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mission configuration file (JSON); defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn modes(&self) -> Result<Vec<StrategyMode>, Error> {
        if self.modes.is_empty() {
            return Ok(StrategyMode::ALL.to_vec());
        }
        self.modes.iter().map(|m| m.parse()).collect()
    }

    fn seeds(&self) -> Result<Vec<u64>, Error> {
        if self.replicates == 0 {
            return Err(Error::Usage("--replicates must be at least 1".into()));
        }
        Ok((self.seed..self.seed + self.replicates).collect())
    }

    fn config(&self) -> Result<MissionConfig, Error> {
        self.config
            .as_ref()
            .map_or_else(|| Ok(MissionConfig::default()), MissionConfig::load)
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario files or preset names (empty, park, uniform-<density>).
    #[arg(long = "scenario", value_delimiter = ',', required = true)]
    scenarios: Vec<String>,
    #[command(flatten)]
    common: Common,
    /// Output directory for metrics.csv, aggregate.csv and logs/.
    #[arg(long, default_value = "eans-out")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Obstacle densities in [0, 0.4].
    #[arg(long, value_delimiter = ',', required = true)]
    densities: Vec<f64>,
    #[command(flatten)]
    common: Common,
    /// Output CSV file.
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct TraceArgs {
    /// Mission log (JSONL) written by `run`.
    log: PathBuf,
    /// velocity-curve, busy-curve or path-heatmap.
    #[arg(long, default_value = "velocity-curve")]
    kind: String,
    /// Output CSV file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ConfigCommand {
    /// Print the effective configuration as JSON.
    Dump {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Generate a scenario from a preset or a generator parameter file.
    Gen {
        /// Preset name (empty, park, uniform-<density>).
        #[arg(long, conflicts_with = "params", required_unless_present = "params")]
        preset: Option<String>,
        /// Generator parameters (JSON).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Seed for presets; overrides the seed in a parameter file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => match std::io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

fn run(args: RunArgs) -> Result<u8> {
    let scenarios = args
        .scenarios
        .iter()
        .map(|s| ScenarioEntry::resolve(s))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = BatchSpec {
        scenarios,
        modes: args.common.modes()?,
        seeds: args.common.seeds()?,
        config: args.common.config()?,
    };
    let result = harness::run(&spec)?;
    result
        .write_to(&args.out)
        .with_context(|| format!("writing results to {}", args.out.display()))?;
    emit(&harness::to_csv(&result.aggregates)?, None)?;
    log::info!(
        "mapping wall-clock across missions: {:.3} s",
        result.mapping_wall().as_secs_f64()
    );
    let collisions = result.collisions();
    if collisions > 0 {
        eprintln!("{collisions} mission(s) ended in collision");
        return Ok(EXIT_COLLISION);
    }
    Ok(0)
}

fn sweep(args: SweepArgs) -> Result<u8> {
    let rows = harness::density_sweep(
        &args.densities,
        &args.common.modes()?,
        &args.common.seeds()?,
        &args.common.config()?,
    )?;
    fs::write(&args.out, harness::to_csv(&rows)?)
        .with_context(|| format!("writing {}", args.out.display()))?;
    let skipped = rows.iter().filter(|r| r.status == SKIPPED).count();
    if skipped > 0 {
        eprintln!("{skipped} row(s) skipped: scenario generation failed");
    }
    if rows
        .iter()
        .any(|r| r.status == eans_core::TerminalStatus::Collision.name())
    {
        eprintln!("sweep contains collisions");
        return Ok(EXIT_COLLISION);
    }
    Ok(0)
}

fn trace(args: TraceArgs) -> Result<u8> {
    let kind: TraceKind = args.kind.parse()?;
    let file =
        fs::File::open(&args.log).with_context(|| format!("opening {}", args.log.display()))?;
    let log = eans_core::MissionLog::read_jsonl(std::io::BufReader::new(file))?;
    emit(&harness::export_trace(&log, kind)?, args.out.as_ref())?;
    Ok(0)
}

fn scenario_gen(
    preset: Option<String>,
    params: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<u8> {
    let scenario = match (preset, params) {
        (Some(name), _) => presets::by_name(&name, seed.unwrap_or(0))?,
        (None, Some(path)) => {
            let text =
                fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let mut p: GenParams = serde_json::from_str(&text).map_err(Error::from)?;
            if let Some(s) = seed {
                p.seed = s;
            }
            generate_scenario(&p)?
        }
        (None, None) => unreachable!("clap requires one of --preset/--params"),
    };
    emit(&(scenario.to_json() + "\n"), out.as_ref())?;
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Trace(a) => trace(a),
        Command::Config(ConfigCommand::Dump { config }) => {
            let cfg = config
                .as_ref()
                .map_or_else(|| Ok(MissionConfig::default()), MissionConfig::load)?;
            emit(&(cfg.to_json() + "\n"), None)?;
            Ok(0)
        }
        Command::Scenario(ScenarioCommand::Gen {
            preset,
            params,
            seed,
            out,
        }) => scenario_gen(preset, params, seed, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
