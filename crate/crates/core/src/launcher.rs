//! Starting SPMD programs: one process per unit connected over TCP, or a
//! single process that runs every unit on its own thread.

use std::path::PathBuf;
use std::process::{Child, Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::runtime::{ENV_LOCALITY, ENV_N_UNITS, ENV_RENDEZVOUS, ENV_TRANSPORT, ENV_UNIT_ID};
use crate::transport::rendezvous::RendezvousServer;
use crate::transport::TransportKind;

#[derive(Clone, Debug)]
pub struct LaunchSpec {
    pub units: usize,
    pub transport: TransportKind,
    /// Address to serve the rendezvous on; an ephemeral loopback port if `None`.
    pub rendezvous: Option<String>,
    pub locality: Option<PathBuf>,
    pub program: PathBuf,
    pub args: Vec<String>,
    pub startup_timeout: Duration,
    /// Collect each unit's stdout instead of passing it through.
    pub capture_stdout: bool,
}

impl LaunchSpec {
    pub fn new(units: usize, transport: TransportKind, program: impl Into<PathBuf>) -> LaunchSpec {
        LaunchSpec {
            units,
            transport,
            rendezvous: None,
            locality: None,
            program: program.into(),
            args: Vec::new(),
            startup_timeout: Duration::from_secs(30),
            capture_stdout: false,
        }
    }

    pub fn args<I, S>(mut self, args: I) -> LaunchSpec
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.args = args.into_iter().map(Into::into).collect();
        self
    }
}

/// Exit status and (if captured) stdout of one launched process.
#[derive(Debug)]
pub struct ProcessOutcome {
    pub status: ExitStatus,
    pub stdout: String,
}

#[derive(Debug)]
pub struct LaunchOutcome {
    /// One entry per process: per unit for TCP runs, a single one for thread runs.
    pub processes: Vec<ProcessOutcome>,
}

impl LaunchOutcome {
    /// 0 if every process succeeded, else the first failing exit code
    /// (1 if it was killed by a signal).
    pub fn exit_code(&self) -> i32 {
        self.processes
            .iter()
            .find(|p| !p.status.success())
            .map(|p| p.status.code().unwrap_or(1))
            .unwrap_or(0)
    }
}

fn command(spec: &LaunchSpec) -> Command {
    let mut cmd = Command::new(&spec.program);
    cmd.args(&spec.args).env(ENV_N_UNITS, spec.units.to_string());
    if let Some(path) = &spec.locality {
        cmd.env(ENV_LOCALITY, path);
    }
    if spec.capture_stdout {
        cmd.stdout(Stdio::piped());
    }
    cmd
}

fn spawn(mut cmd: Command, spec: &LaunchSpec) -> Result<Child> {
    cmd.spawn()
        .map_err(|e| Error::Startup(format!("cannot start {}: {e}", spec.program.display())))
}

fn collect(children: Vec<Child>) -> Result<LaunchOutcome> {
    let processes = children
        .into_iter()
        .map(|child| {
            let out = child.wait_with_output()?;
            Ok(ProcessOutcome {
                status: out.status,
                stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LaunchOutcome { processes })
}

/// Runs the program and waits for it. A failing unit makes the launcher stop
/// the remaining ones.
pub fn launch(spec: &LaunchSpec) -> Result<LaunchOutcome> {
    if spec.units == 0 {
        return Err(Error::usage("at least one unit is required"));
    }
    match spec.transport {
        TransportKind::InProcess => {
            let mut cmd = command(spec);
            cmd.env(ENV_TRANSPORT, "thread").env_remove(ENV_UNIT_ID).env_remove(ENV_RENDEZVOUS);
            collect(vec![spawn(cmd, spec)?])
        }
        TransportKind::TcpProcess => launch_processes(spec),
    }
}

fn launch_processes(spec: &LaunchSpec) -> Result<LaunchOutcome> {
    let server = RendezvousServer::bind(spec.rendezvous.as_deref().unwrap_or("127.0.0.1:0"))?;
    let addr = server.local_addr()?.to_string();
    let n = spec.units;
    let timeout = spec.startup_timeout;
    // Detached: if a unit dies before connecting, the server only times out.
    let rendezvous = thread::spawn(move || server.serve(n, timeout));

    let mut children = Vec::with_capacity(n);
    for unit in 0..n {
        let mut cmd = command(spec);
        cmd.env(ENV_UNIT_ID, unit.to_string())
            .env(ENV_RENDEZVOUS, &addr)
            .env(ENV_TRANSPORT, "process");
        match spawn(cmd, spec) {
            Ok(child) => children.push(child),
            Err(e) => {
                kill_all(&mut children);
                return Err(e);
            }
        }
    }

    // Readers keep piped stdout from filling up while we poll for failures.
    let mut readers = Vec::new();
    for child in &mut children {
        readers.push(child.stdout.take().map(|mut out| {
            thread::spawn(move || {
                let mut buf = String::new();
                let _ = std::io::Read::read_to_string(&mut out, &mut buf);
                buf
            })
        }));
    }

    let mut statuses: Vec<Option<ExitStatus>> = vec![None; n];
    let deadline = Instant::now() + timeout;
    let mut rendezvous = Some(rendezvous);
    loop {
        for (i, child) in children.iter_mut().enumerate() {
            if statuses[i].is_none() {
                statuses[i] = child.try_wait()?;
            }
        }
        if statuses.iter().flatten().any(|s| !s.success()) {
            kill_all(&mut children);
            for (i, child) in children.iter_mut().enumerate() {
                if statuses[i].is_none() {
                    statuses[i] = Some(child.wait()?);
                }
            }
            break;
        }
        if statuses.iter().all(Option::is_some) {
            break;
        }
        if let Some(h) = rendezvous.take_if(|h| h.is_finished()) {
            if let Ok(Err(e)) = h.join() {
                kill_all(&mut children);
                return Err(e);
            }
        }
        if rendezvous.is_some() && Instant::now() > deadline + Duration::from_secs(1) {
            kill_all(&mut children);
            return Err(Error::Startup("units did not complete the rendezvous".into()));
        }
        thread::sleep(Duration::from_millis(5));
    }

    let processes = statuses
        .into_iter()
        .zip(readers)
        .map(|(status, reader)| ProcessOutcome {
            status: status.expect("every child waited for"),
            stdout: reader.map(|h| h.join().unwrap_or_default()).unwrap_or_default(),
        })
        .collect();
    Ok(LaunchOutcome { processes })
}

fn kill_all(children: &mut [Child]) {
    for child in children {
        let _ = child.kill();
    }
}
