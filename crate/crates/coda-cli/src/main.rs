//! `coda` - place DAG-structured stream applications on cloud-fog
//! infrastructures and compare the matching-based placement against three
//! reference schedulers.

#![forbid(unsafe_code)]

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use coda_core::harness::{
    emit_results, generate_scenario, load_scenario, run_sweep, Algorithm, GenParams, Scenario,
    Sweep,
};
use coda_core::matching::{staged_coda, MatchRunConfig, StagedOutcome};
use coda_core::ranking::RankingMode;

#[derive(Parser)]
#[command(name = "coda", version, about = "Stream application placement on the cloud-fog continuum")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Staged,
    Static,
}

impl From<ModeArg> for RankingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Staged => RankingMode::Staged,
            ModeArg::Static => RankingMode::Static,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Cpu,
    Data,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep and emit one result row per (algorithm, value).
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Which parameter to sweep: cpu demand or data element size.
        #[arg(long, value_enum)]
        sweep: SweepArg,
        /// How preference tables resolve upstream channels.
        #[arg(long, value_enum, default_value = "staged")]
        mode: ModeArg,
        /// Comma-separated subset of: coda,heft_oc,rtr_rp,cloudpath.
        #[arg(long, default_value = "coda,heft_oc,rtr_rp,cloudpath")]
        algorithms: String,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Generate a random scenario document.
    Generate {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 7)]
        microservices: usize,
        #[arg(long, default_value_t = 5)]
        resources: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the matching and audit stability plus structural invariants.
    /// Exits non-zero when anything is violated.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "staged")]
        mode: ModeArg,
    },
    /// Print the matching state-transition log, one transition per line.
    Trace {
        #[arg(long)]
        scenario: PathBuf,
        /// The walkthrough-style single game is the default here.
        #[arg(long, value_enum, default_value = "static")]
        mode: ModeArg,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CODA_LOG")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn match_scenario(s: &Scenario, mode: RankingMode) -> Result<StagedOutcome, String> {
    let cfg = MatchRunConfig::with_mode(mode);
    staged_coda(&s.application, &s.topology, &s.gateway, &cfg).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run { scenario, sweep, mode, algorithms, out, format } => {
            let s = load_scenario(&scenario).map_err(|e| e.to_string())?;
            let sweep = match sweep {
                SweepArg::Cpu => Sweep::cpu_default(),
                SweepArg::Data => Sweep::data_default(),
            };
            let algorithms = parse_algorithms(&algorithms)?;
            let rows = run_sweep(&s, &sweep, &algorithms, mode.into());
            let format = match format {
                FormatArg::Csv => "csv",
                FormatArg::Json => "json",
            };
            write_output(out, |w| emit_results(&rows, format, w))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate { seed, microservices, resources, out } => {
            let params =
                GenParams { n_microservices: microservices, n_resources: resources, ..Default::default() };
            let doc = generate_scenario(seed, &params);
            let json = serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?;
            write_output(out, |w| w.write_all(json.as_bytes()).and_then(|_| w.write_all(b"\n")))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { scenario, mode } => {
            let s = load_scenario(&scenario).map_err(|e| e.to_string())?;
            let outcome = match_scenario(&s, mode.into())?;
            let mut report = outcome.verify();
            let capacities = s.topology.resources().map(|r| (r.id.clone(), r.capacity)).collect();
            if let Err(v) = outcome.matching.check_structure(&capacities) {
                report.stable = false;
                report.violations.push(v);
            }
            println!(
                "placed {} of {} microservices across {} resources",
                outcome.matching.assignment.len(),
                s.application.len(),
                outcome.matching.alloc.values().filter(|l| !l.is_empty()).count(),
            );
            for m in &outcome.matching.unplaced {
                println!("unplaced {m}");
            }
            for v in &report.violations {
                println!("violation: {v}");
            }
            for b in &report.blocking_pairs {
                println!("blocking pair: {} {}", b.microservice, b.resource);
            }
            if report.stable {
                println!("stable: true");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("stable: false");
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Trace { scenario, mode } => {
            let s = load_scenario(&scenario).map_err(|e| e.to_string())?;
            let outcome = match_scenario(&s, mode.into())?;
            print!("{}", outcome.matching.trace_text());
            println!();
            for (r, list) in &outcome.matching.alloc {
                if list.is_empty() {
                    continue;
                }
                let ids: Vec<&str> =
                    list.iter().map(|e| e.microservice.0.as_str()).collect();
                println!("alloc {r} {}", ids.join(","));
            }
            for m in &outcome.matching.unplaced {
                println!("unplaced {m}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_algorithms(spec: &str) -> Result<Vec<Algorithm>, String> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| Algorithm::parse(name).ok_or_else(|| format!("unknown algorithm `{name}`")))
        .collect()
}

fn write_output(
    out: Option<PathBuf>,
    write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), String> {
    match out {
        Some(path) => {
            let mut file = std::fs::File::create(&path)
                .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
            write(&mut file).map_err(|e| format!("cannot write {}: {e}", path.display()))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).map_err(|e| format!("cannot write stdout: {e}"))
        }
    }
}
