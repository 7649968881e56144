#![allow(dead_code)]

pub mod golden;
pub mod oracle;
pub mod stress;

use pgas::{launch, Context, Distribution, RuntimeConfig, TransportKind};

pub const TRANSPORTS: [TransportKind; 2] = [TransportKind::InProcess, TransportKind::TcpProcess];

pub const BASIC_DISTS: [Distribution; 3] = [Distribution::Blocked, Distribution::CYCLIC, Distribution::BlockCyclic(3)];

pub fn config(transport: TransportKind, units: usize) -> RuntimeConfig {
    match transport {
        TransportKind::InProcess => RuntimeConfig::in_process(units),
        TransportKind::TcpProcess => RuntimeConfig::tcp(units),
    }
}

/// Runs `f` on `units` units and returns the per-unit results.
pub fn run<R: Send>(transport: TransportKind, units: usize, f: impl Fn(&Context) -> R + Sync) -> Vec<R> {
    launch(&config(transport, units), f).expect("launch")
}

/// Runs `f` on every transport and unit count.
pub fn each_config(units: &[usize], f: impl Fn(&Context) + Sync) {
    for &t in &TRANSPORTS {
        for &u in units {
            run(t, u, &f);
        }
    }
}
