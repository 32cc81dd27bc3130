//! `sottovoce`: validate catalogs, run and check scenarios, fuzz the engine,
//! and serve live sessions.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;
use sottovoce_core::batch::Exec;
use sottovoce_core::generate::ScenarioBounds;
use sottovoce_core::harness::fuzz::{check_scenario, fuzz, minimize, FuzzConfig};
use sottovoce_core::harness::{
    compute_stats, load_scenario, oracle_check, resolve_catalog, run_scenario, Scenario, ScenarioError, BUILTIN_SAMPLE, DEFAULT_STEP_MS,
};
use sottovoce_core::{Catalog, NetworkConfig};
use sottovoce_server::{Server, ServerConfig, DEFAULT_PORT, DEFAULT_TICK_MS};

const EXIT_INVALID: u8 = 1;
const EXIT_VIOLATION: u8 = 2;

#[derive(Parser)]
#[command(name = "sottovoce", version, about = "Paired audio guidebooks with eavesdropping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a catalog and print a summary.
    Validate {
        /// Catalog JSON path, or `builtin:sample`.
        catalog: String,
    },
    /// Run a scenario and print its timeline as JSON lines.
    Run {
        scenario: PathBuf,
        /// Write the timeline here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print sharing statistics as one JSON object.
        #[arg(long)]
        stats: bool,
    },
    /// Compare the engine against the reference oracle and check invariants.
    OracleCheck {
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_STEP_MS)]
        step_ms: u64,
        /// Where to write a minimized failing scenario [default: <scenario>.repro.json]
        #[arg(long)]
        repro: Option<PathBuf>,
    },
    /// Check randomly generated scenarios against the invariants.
    Fuzz {
        #[arg(long, default_value_t = 1000)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        max_loss: f64,
        #[arg(long, default_value_t = 200)]
        max_delay_ms: u64,
        /// Also compare every run against the oracle at this step.
        #[arg(long)]
        oracle_step_ms: Option<u64>,
        /// Run on one thread.
        #[arg(long)]
        sequential: bool,
        /// Directory for the minimized reproduction of the first failure.
        #[arg(long, default_value = ".")]
        repro_dir: PathBuf,
    },
    /// Serve live sessions over WebSocket.
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Catalog JSON path [default: the built-in sample]
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        loss: f64,
        #[arg(long, default_value_t = 0)]
        delay_min_ms: u64,
        #[arg(long, default_value_t = 0)]
        delay_max_ms: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TICK_MS)]
        tick_ms: u64,
        /// Serve browser client files from this directory.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { catalog } => validate(&catalog),
        Command::Run { scenario, out, stats } => run(&scenario, out.as_deref(), stats),
        Command::OracleCheck { scenario, step_ms, repro } => {
            let repro = repro.unwrap_or_else(|| scenario.with_extension("repro.json"));
            check(&scenario, step_ms, &repro)
        }
        Command::Fuzz { runs, seed, max_loss, max_delay_ms, oracle_step_ms, sequential, repro_dir } => {
            let bounds = ScenarioBounds { max_loss, max_delay_ms, ..ScenarioBounds::default() };
            let config = FuzzConfig { runs, seed, bounds, oracle_step_ms };
            fuzz_cmd(&config, if sequential { Exec::Sequential } else { Exec::Parallel }, &repro_dir)
        }
        Command::Serve { port, host, catalog, loss, delay_min_ms, delay_max_ms, seed, tick_ms, static_dir } => {
            let network = NetworkConfig { loss_probability: loss, delay_min_ms, delay_max_ms, duplicate_probability: 0.0, seed };
            serve(&host, port, catalog.as_deref(), network, tick_ms, static_dir)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn validate(catalog_ref: &str) -> Result<ExitCode> {
    match resolve_catalog(catalog_ref, Path::new(".")) {
        Ok(catalog) => {
            println!("{}", serde_json::to_string_pretty(&catalog.summary())?);
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("invalid catalog: {e}");
            Ok(ExitCode::from(EXIT_INVALID))
        }
    }
}

fn exit_for(e: &ScenarioError) -> ExitCode {
    match e {
        ScenarioError::Engine(_) => ExitCode::from(EXIT_VIOLATION),
        _ => ExitCode::from(EXIT_INVALID),
    }
}

fn run(path: &Path, out: Option<&Path>, stats: bool) -> Result<ExitCode> {
    let (scenario, catalog) = match load_scenario(path) {
        Ok(loaded) => loaded,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return Ok(exit_for(&e));
        }
    };
    let timeline = match run_scenario(&scenario, &catalog) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return Ok(exit_for(&e));
        }
    };
    match out {
        Some(out) => fs::write(out, timeline.to_jsonl()).with_context(|| format!("writing {}", out.display()))?,
        None => print!("{}", timeline.to_jsonl()),
    }
    if stats {
        println!("{}", serde_json::to_string(&compute_stats(&timeline, &scenario))?);
    }
    Ok(ExitCode::SUCCESS)
}

fn write_repro(path: &Path, scenario: &Scenario) -> Result<()> {
    fs::write(path, scenario.to_json_pretty()).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("minimized reproduction written to {}", path.display());
    Ok(())
}

fn check(path: &Path, step_ms: u64, repro: &Path) -> Result<ExitCode> {
    anyhow::ensure!(step_ms > 0, "--step-ms must be positive");
    let (scenario, catalog) = match load_scenario(path) {
        Ok(loaded) => loaded,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return Ok(exit_for(&e));
        }
    };
    let comparison = oracle_check(&scenario, &catalog, step_ms).map_err(|e| anyhow::anyhow!("{e}"))?;
    let violations = check_scenario(&scenario, &catalog, None);
    let ok = comparison.agrees() && violations.is_empty();
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "agrees": comparison.agrees(),
            "samples": comparison.samples,
            "step_ms": step_ms,
            "max_change_offset_ms": comparison.max_change_offset_ms,
            "mismatches": comparison.mismatches.iter().take(20).collect::<Vec<_>>(),
            "violations": violations.iter().take(20).collect::<Vec<_>>(),
        }))?
    );
    if ok {
        return Ok(ExitCode::SUCCESS);
    }
    let minimized = minimize(&scenario, |s| !check_scenario(s, &catalog, Some(step_ms)).is_empty());
    write_repro(repro, &minimized)?;
    Ok(ExitCode::from(EXIT_VIOLATION))
}

fn fuzz_cmd(config: &FuzzConfig, exec: Exec, repro_dir: &Path) -> Result<ExitCode> {
    let catalog = Catalog::sample();
    let started = Instant::now();
    let report = fuzz(&catalog, config, exec);
    let elapsed_ms = started.elapsed().as_millis();
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "runs": report.runs,
            "seed": config.seed,
            "events": report.events,
            "failed_runs": report.failures.iter().map(|f| f.run).collect::<Vec<_>>(),
            "violations": report.failures.iter().map(|f| f.violations.len()).sum::<usize>(),
            "elapsed_ms": elapsed_ms,
            "parallel": exec == Exec::Parallel && Exec::parallel_available(),
        }))?
    );
    let Some(first) = report.failures.first() else {
        return Ok(ExitCode::SUCCESS);
    };
    for v in first.violations.iter().take(10) {
        eprintln!("run {}: {v}", first.run);
    }
    let minimized = minimize(&first.scenario, |s| !check_scenario(s, &catalog, config.oracle_step_ms).is_empty());
    fs::create_dir_all(repro_dir).with_context(|| format!("creating {}", repro_dir.display()))?;
    write_repro(&repro_dir.join(format!("fuzz-repro-seed{}-run{}.json", config.seed, first.run)), &minimized)?;
    Ok(ExitCode::from(EXIT_VIOLATION))
}

fn serve(
    host: &str,
    port: u16,
    catalog: Option<&Path>,
    network: NetworkConfig,
    tick_ms: u64,
    static_dir: Option<PathBuf>,
) -> Result<ExitCode> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let (catalog, catalog_ref) = match catalog {
        Some(path) => {
            let abs = fs::canonicalize(path).with_context(|| format!("reading {}", path.display()))?;
            match resolve_catalog(&abs.to_string_lossy(), Path::new("/")) {
                Ok(c) => (c, abs.to_string_lossy().into_owned()),
                Err(e) => {
                    eprintln!("invalid catalog: {e}");
                    return Ok(ExitCode::from(EXIT_INVALID));
                }
            }
        }
        None => (Catalog::sample(), BUILTIN_SAMPLE.to_owned()),
    };
    let mut config = ServerConfig::new(catalog, catalog_ref);
    config.network = network;
    config.tick_ms = tick_ms;
    config.static_dir = static_dir;
    let server = match Server::new(config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("invalid server settings: {e}");
            return Ok(ExitCode::from(EXIT_INVALID));
        }
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port)).await.with_context(|| format!("binding {host}:{port}"))?;
        eprintln!("listening on http://{} (WebSocket at /ws)", listener.local_addr()?);
        server.serve(listener).await?;
        Ok(ExitCode::SUCCESS)
    })
}
