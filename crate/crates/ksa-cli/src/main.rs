//! Command-line front end for the agreement laboratory: execute one
//! scenario file, run a seeded fuzz campaign, or exhaustively enumerate a
//! small adversary or schedule space.
//!
//! Process-level contract: exit 0 when every check passes, exit 1 when a
//! property or expectation is violated, exit 2 on usage, parse, or
//! configuration errors (including oracle refusals). `KSA_LOG_LEVEL`
//! (quiet, info, trace) controls stderr logging; reports go to stdout or
//! `--out`.

mod report;
mod scenario_file;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, trace};

use ksa_core::authsig::ValidityMode;
use ksa_core::checker::oracle::{oracle_enumerate, OracleSpace};
use ksa_core::fuzz::fuzz_campaign;
use ksa_core::model::{ProcessId, Protocol, SystemConfig, Value};
use ksa_core::scenarios::{execute_scenario, Scenario, ScenarioReport};

use scenario_file::ScenarioFile;

#[derive(Parser)]
#[command(name = "ksa", version, about = "k-set agreement simulation laboratory")]
struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    MachineReadable,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario file and check every relevant property.
    Run {
        /// Scenario file (TOML; fields n, t, protocol, values, adversary,
        /// seed, schedule, expect).
        scenario: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a seeded campaign of randomized scenarios.
    Fuzz {
        #[arg(long, value_enum)]
        protocol: ProtocolArg,
        #[arg(short = 'n', long = "n")]
        n: u32,
        #[arg(short = 't', long = "t")]
        t: u32,
        /// Number of generated runs.
        #[arg(long, default_value_t = 1000)]
        runs: u64,
        /// Master seed; any run is replayable from (config, seed, index).
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exhaustively enumerate a small space and check every execution.
    Oracle {
        #[arg(long, value_enum)]
        protocol: OracleProtocolArg,
        #[arg(short = 'n', long = "n")]
        n: u32,
        #[arg(short = 't', long = "t")]
        t: u32,
        /// Refuse spaces that need more executions than this.
        #[arg(long, default_value_t = 1_000_000)]
        bound: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    TwoRound,
    TrbOptimal,
    AsyncSnapshot,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Protocol {
        match p {
            ProtocolArg::TwoRound => Protocol::TwoRound,
            ProtocolArg::TrbOptimal => Protocol::TrbOptimal,
            ProtocolArg::AsyncSnapshot => Protocol::AsyncSnapshot,
        }
    }
}

/// Spaces the oracle verb can sweep. `trb` drives a single authenticated
/// broadcast instance under template adversaries; the protocol names sweep
/// input assignments (synchronous) or schedules (snapshot).
#[derive(Clone, Copy, ValueEnum)]
enum OracleProtocolArg {
    Trb,
    TwoRound,
    TrbOptimal,
    AsyncSnapshot,
}

fn main() {
    match real_main() {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}

fn real_main() -> Result<i32> {
    let cli = Cli::parse();
    init_logging()?;
    match cli.command {
        Command::Run { scenario, seed } => {
            cmd_run(&scenario, seed, cli.out.as_deref(), cli.format)
        }
        Command::Fuzz { protocol, n, t, runs, seed } => {
            let cfg = SystemConfig { n, t, protocol: protocol.into() };
            cmd_fuzz(cfg, runs, seed, cli.out.as_deref(), cli.format)
        }
        Command::Oracle { protocol, n, t, bound } => {
            cmd_oracle(protocol, n, t, bound, cli.out.as_deref(), cli.format)
        }
    }
}

fn init_logging() -> Result<()> {
    let level = std::env::var("KSA_LOG_LEVEL").unwrap_or_else(|_| "quiet".to_string());
    let filter = match level.as_str() {
        "quiet" => log::LevelFilter::Off,
        "info" => log::LevelFilter::Info,
        "trace" => log::LevelFilter::Trace,
        other => bail!("KSA_LOG_LEVEL must be quiet, info, or trace (got {other:?})"),
    };
    env_logger::Builder::new().filter_level(filter).try_init().ok();
    Ok(())
}

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content)
            .with_context(|| format!("writing report to {}", path.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Advisory attached to synchronous runs outside the honest-majority
/// margin: the agreement bound still holds, but Byzantine processes can
/// dominate every quorum.
fn margin_advisory(cfg: SystemConfig) -> Option<String> {
    (cfg.protocol != Protocol::AsyncSnapshot && cfg.n <= 2 * cfg.t).then(|| {
        format!(
            "n <= 2t (n={}, t={}): no honest-majority margin; faulty processes can dominate every quorum",
            cfg.n, cfg.t
        )
    })
}

#[derive(serde::Serialize)]
struct RunReportView<'a> {
    scenario: &'a Scenario,
    advisory: Option<&'a str>,
    report: &'a ScenarioReport,
}

fn cmd_run(path: &Path, seed: Option<u64>, out: Option<&Path>, format: Format) -> Result<i32> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading scenario {}", path.display()))?;
    let file: ScenarioFile = toml::from_str(&text)
        .with_context(|| format!("{}: malformed scenario", path.display()))?;
    let mut scenario = file.into_scenario().with_context(|| path.display().to_string())?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    info!(
        "running {} n={} t={} seed={}",
        scenario.cfg.protocol, scenario.cfg.n, scenario.cfg.t, scenario.seed
    );
    let report = execute_scenario(&scenario)
        .with_context(|| format!("{}: scenario failed to execute", path.display()))?;
    for v in &report.verdicts {
        trace!("{v}");
    }
    let advisory = margin_advisory(scenario.cfg);
    let rendered = match format {
        Format::Text => report::render_scenario_text(&scenario, &report, advisory.as_deref()),
        Format::MachineReadable => {
            let view =
                RunReportView { scenario: &scenario, advisory: advisory.as_deref(), report: &report };
            let mut s = serde_json::to_string_pretty(&view)?;
            s.push('\n');
            s
        }
    };
    emit(out, &rendered)?;
    info!("result: {}", if report.passed() { "pass" } else { "fail" });
    Ok(if report.passed() { 0 } else { 1 })
}

fn cmd_fuzz(
    cfg: SystemConfig,
    runs: u64,
    seed: u64,
    out: Option<&Path>,
    format: Format,
) -> Result<i32> {
    info!("fuzzing {} n={} t={} runs={} master_seed={seed}", cfg.protocol, cfg.n, cfg.t, runs);
    let summary = fuzz_campaign(cfg, runs, seed).context("campaign failed to execute")?;
    let rendered = match format {
        Format::Text => report::render_fuzz_text(&summary),
        Format::MachineReadable => {
            let mut s = serde_json::to_string_pretty(&summary)?;
            s.push('\n');
            s
        }
    };
    emit(out, &rendered)?;
    info!(
        "campaign done: {} violations, worst distinct {}",
        summary.violations.len(),
        summary.max_distinct
    );
    Ok(if summary.clean() { 0 } else { 1 })
}

fn cmd_oracle(
    protocol: OracleProtocolArg,
    n: u32,
    t: u32,
    bound: u64,
    out: Option<&Path>,
    format: Format,
) -> Result<i32> {
    let two = vec![Value::Domain(1), Value::Domain(2)];
    let (cfg, space) = match protocol {
        OracleProtocolArg::Trb => (
            SystemConfig { n, t, protocol: Protocol::TrbOptimal },
            OracleSpace::TrbTemplates {
                sender: ProcessId(0),
                values: two,
                mode: ValidityMode::Strict,
            },
        ),
        OracleProtocolArg::TwoRound => (
            SystemConfig { n, t, protocol: Protocol::TwoRound },
            OracleSpace::SyncInputs { values: two },
        ),
        OracleProtocolArg::TrbOptimal => (
            SystemConfig { n, t, protocol: Protocol::TrbOptimal },
            OracleSpace::SyncInputs { values: two },
        ),
        OracleProtocolArg::AsyncSnapshot => (
            SystemConfig { n, t, protocol: Protocol::AsyncSnapshot },
            OracleSpace::AsyncSchedules {
                initial_values: ksa_core::model::all_processes(n)
                    .map(|p| (p, Value::Domain(p.0 + 1)))
                    .collect(),
            },
        ),
    };
    info!("enumerating {} n={n} t={t} bound={bound}", cfg.protocol);
    let summary = oracle_enumerate(cfg, space, bound).context("enumeration refused")?;
    let rendered = match format {
        Format::Text => report::render_oracle_text(&summary),
        Format::MachineReadable => {
            let mut s = serde_json::to_string_pretty(&summary)?;
            s.push('\n');
            s
        }
    };
    emit(out, &rendered)?;
    info!("explored {} leaves, {} violations", summary.explored, summary.violations.len());
    Ok(if summary.violations.is_empty() { 0 } else { 1 })
}
