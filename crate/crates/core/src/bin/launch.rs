//! Starts an SPMD program on N units.
//!
//!     launch --units 4 --transport process -- ./my_program arg1 arg2

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, ValueEnum};
use pgas::launcher::{self, LaunchSpec};
use pgas::TransportKind;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Transport {
    Thread,
    Process,
}

#[derive(Parser, Debug)]
#[command(about = "Start a PGAS program on a fixed number of units")]
struct Args {
    #[arg(long, short = 'n')]
    units: usize,
    #[arg(long, value_enum, default_value = "process")]
    transport: Transport,
    /// HOST:PORT to serve the rendezvous on (process transport).
    #[arg(long)]
    rendezvous: Option<String>,
    /// Locality map (JSON) handed to every unit.
    #[arg(long)]
    locality: Option<PathBuf>,
    /// Seconds to wait for every unit to join.
    #[arg(long, default_value_t = 30)]
    startup_timeout: u64,
    program: PathBuf,
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    args: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let transport = match args.transport {
        Transport::Thread => TransportKind::InProcess,
        Transport::Process => TransportKind::TcpProcess,
    };
    let mut spec = LaunchSpec::new(args.units, transport, args.program).args(args.args);
    spec.rendezvous = args.rendezvous;
    spec.locality = args.locality;
    spec.startup_timeout = Duration::from_secs(args.startup_timeout);
    match launcher::launch(&spec) {
        Ok(outcome) => ExitCode::from(outcome.exit_code().clamp(0, 255) as u8),
        Err(e) => {
            eprintln!("launch: {e}");
            ExitCode::FAILURE
        }
    }
}
