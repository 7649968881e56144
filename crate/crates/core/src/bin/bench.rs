//! Benchmark drivers.
//!
//!     bench gups --n-local 1000000 --rounds 10 --variant local_subscript
//!     bench min-element --n 100000000 --units 8

use std::env;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pgas::bench::{self, BenchResult, GupsParams, GupsVariant, CSV_HEADER};
use pgas::launcher::{self, LaunchSpec};
use pgas::runtime::{ENV_TRANSPORT, ENV_UNIT_ID};
use pgas::{Context, Error, Result, RuntimeConfig, TransportKind, UnitId};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Transport {
    Thread,
    Process,
}

#[derive(Parser, Debug)]
#[command(about = "PGAS runtime benchmarks; CSV on stdout or to a file")]
struct Args {
    #[command(subcommand)]
    command: Command,
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Local update rate through the various local access paths.
    Gups {
        #[arg(long)]
        n_local: usize,
        #[arg(long, default_value_t = 10)]
        rounds: usize,
        /// local_subscript, local_iterator, local_pointer, raw_buffer,
        /// reference_sequential_container or indirect_lookup; "all" runs each.
        #[arg(long, default_value = "all")]
        variant: String,
        #[arg(long, default_value_t = 1)]
        units: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, value_enum, default_value = "thread")]
        transport: Transport,
    },
    /// Time to find the minimum of a pseudo-random array.
    MinElement {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        units: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, value_enum, default_value = "process")]
        transport: Transport,
    },
}

impl Command {
    fn units(&self) -> usize {
        match self {
            Command::Gups { units, .. } | Command::MinElement { units, .. } => *units,
        }
    }

    fn transport(&self) -> Transport {
        match self {
            Command::Gups { transport, .. } | Command::MinElement { transport, .. } => *transport,
        }
    }

    fn run(&self, ctx: &Context) -> Result<Vec<BenchResult>> {
        match self {
            Command::Gups {
                n_local,
                rounds,
                variant,
                reps,
                ..
            } => {
                let variants = if variant == "all" {
                    GupsVariant::ALL.to_vec()
                } else {
                    vec![variant.parse()?]
                };
                variants
                    .into_iter()
                    .map(|variant| {
                        bench::run_gups(
                            ctx,
                            GupsParams {
                                n_local: *n_local,
                                rounds: *rounds,
                                variant,
                                reps: *reps,
                            },
                        )
                    })
                    .collect()
            }
            Command::MinElement { n, reps, .. } => Ok(vec![bench::run_min_element(ctx, *n, *reps)?]),
        }
    }
}

fn csv(results: &[BenchResult]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in results {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Runs the benchmark on every unit this process hosts and returns unit 0's
/// CSV, if unit 0 is here.
fn run_units(command: &Command, config: Option<RuntimeConfig>) -> Result<Option<String>> {
    let body = |ctx: &Context| (ctx.my_id(), command.run(ctx));
    let outcomes = match config {
        Some(config) => pgas::launch(&config, body)?,
        None => pgas::run(body)?,
    };
    let mut csv_out = None;
    for (unit, result) in outcomes {
        let results = result?;
        if unit == UnitId(0) {
            csv_out = Some(csv(&results));
        }
    }
    Ok(csv_out)
}

/// Re-runs this binary on `units` processes and returns unit 0's output.
fn spawn_processes(command: &Command) -> Result<String> {
    let exe = env::current_exe()?;
    let args: Vec<String> = env::args().skip(1).collect();
    let mut spec = LaunchSpec::new(command.units(), TransportKind::TcpProcess, exe).args(without_output(args));
    spec.capture_stdout = true;
    let outcome = launcher::launch(&spec)?;
    if outcome.exit_code() != 0 {
        return Err(Error::Benchmark(format!(
            "a unit exited with status {}",
            outcome.exit_code()
        )));
    }
    Ok(outcome.processes[0].stdout.clone())
}

/// Drops `-o FILE` / `--output FILE`: only the parent writes the file.
fn without_output(args: Vec<String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
        } else if a == "-o" || a == "--output" {
            skip = true;
        } else if !a.starts_with("--output=") {
            out.push(a);
        }
    }
    out
}

fn execute(args: &Args) -> Result<String> {
    let command = &args.command;
    // Started by a launcher: this process hosts one unit or all of them.
    if env::var_os(ENV_UNIT_ID).is_some() || env::var_os(ENV_TRANSPORT).is_some() {
        return Ok(run_units(command, None)?.unwrap_or_default());
    }
    match command.transport() {
        Transport::Thread => Ok(run_units(command, Some(RuntimeConfig::in_process(command.units())))?
            .expect("unit 0 runs in this process")),
        Transport::Process => spawn_processes(command),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let out = match execute(&args) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("bench: {e}");
            return ExitCode::FAILURE;
        }
    };
    match &args.output {
        Some(path) => {
            if let Err(e) = fs::write(path, out) {
                eprintln!("bench: cannot write {}: {e}", path.display());
                return ExitCode::FAILURE;
            }
        }
        None => print!("{out}"),
    }
    ExitCode::SUCCESS
}
