//! SPMD execution: units, runtime configuration, initialization and teams.

mod locality;
mod team;

use std::cell::Cell;
use std::env;
use std::fmt;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::memory::{GlobalPointer, GlobalRef};
use crate::transport::local::{LocalTransport, LocalWorld};
use crate::transport::rendezvous::RendezvousServer;
use crate::transport::tcp::TcpTransport;
use crate::transport::{Endpoint, SegmentTable, StatsSnapshot, TransportKind};

pub use locality::LocalityMap;
pub use team::{split_ranges, Check, Team};
pub(crate) use team::TeamInner;

pub const ENV_UNIT_ID: &str = "PGAS_UNIT_ID";
pub const ENV_N_UNITS: &str = "PGAS_N_UNITS";
pub const ENV_RENDEZVOUS: &str = "PGAS_RENDEZVOUS";
pub const ENV_TRANSPORT: &str = "PGAS_TRANSPORT";
pub const ENV_LOCALITY: &str = "PGAS_LOCALITY";

/// Zero-based unit id, either global or relative to a team.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UnitId(pub u32);

impl UnitId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for UnitId {
    fn from(v: usize) -> UnitId {
        UnitId(v as u32)
    }
}

#[derive(Clone, Debug)]
pub struct RuntimeConfig {
    pub n_units: usize,
    pub transport: TransportKind,
    /// `HOST:PORT` of the rendezvous socket (TCP only).
    pub rendezvous: Option<String>,
    pub locality: Option<LocalityMap>,
    /// This process's unit id (TCP only, when units are separate processes).
    pub unit_id: Option<u32>,
    pub startup_timeout: Duration,
}

impl RuntimeConfig {
    pub fn in_process(n_units: usize) -> RuntimeConfig {
        RuntimeConfig {
            n_units,
            transport: TransportKind::InProcess,
            rendezvous: None,
            locality: None,
            unit_id: None,
            startup_timeout: Duration::from_secs(30),
        }
    }

    pub fn tcp(n_units: usize) -> RuntimeConfig {
        RuntimeConfig {
            transport: TransportKind::TcpProcess,
            ..RuntimeConfig::in_process(n_units)
        }
    }

    pub fn with_locality(mut self, map: LocalityMap) -> RuntimeConfig {
        self.locality = Some(map);
        self
    }

    pub fn with_rendezvous(mut self, addr: impl Into<String>) -> RuntimeConfig {
        self.rendezvous = Some(addr.into());
        self
    }

    pub fn with_unit_id(mut self, unit: u32) -> RuntimeConfig {
        self.unit_id = Some(unit);
        self
    }

    pub fn with_startup_timeout(mut self, timeout: Duration) -> RuntimeConfig {
        self.startup_timeout = timeout;
        self
    }

    /// Reads the configuration the launcher passes to its children.
    /// Without any `PGAS_*` variables this is a single in-process unit.
    pub fn from_env() -> Result<RuntimeConfig> {
        let n_units = match env::var(ENV_N_UNITS) {
            Ok(v) => v
                .parse()
                .map_err(|_| Error::Startup(format!("{ENV_N_UNITS}={v:?} is not a unit count")))?,
            Err(_) => 1,
        };
        let unit_id = match env::var(ENV_UNIT_ID) {
            Ok(v) => Some(
                v.parse()
                    .map_err(|_| Error::Startup(format!("{ENV_UNIT_ID}={v:?} is not a unit id")))?,
            ),
            Err(_) => None,
        };
        let transport = match env::var(ENV_TRANSPORT).as_deref() {
            Ok("process") | Ok("tcp") => TransportKind::TcpProcess,
            Ok("thread") | Ok("in_process") => TransportKind::InProcess,
            Ok(other) => return Err(Error::Startup(format!("unknown transport {other:?}"))),
            Err(_) if unit_id.is_some() => TransportKind::TcpProcess,
            Err(_) => TransportKind::InProcess,
        };
        let mut config = match transport {
            TransportKind::InProcess => RuntimeConfig::in_process(n_units),
            TransportKind::TcpProcess => RuntimeConfig::tcp(n_units),
        };
        config.unit_id = unit_id;
        config.rendezvous = env::var(ENV_RENDEZVOUS).ok();
        if let Ok(path) = env::var(ENV_LOCALITY) {
            config.locality = Some(LocalityMap::from_file(path)?);
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_units == 0 {
            return Err(Error::usage("n_units must be at least 1"));
        }
        if self.n_units > u32::MAX as usize {
            return Err(Error::usage("unit ids must fit in 32 bits"));
        }
        if let Some(map) = &self.locality {
            map.validate(self.n_units)?;
        }
        Ok(())
    }
}

/// Per-unit runtime state shared by the context, teams and allocations.
pub(crate) struct Runtime {
    pub(crate) endpoint: Endpoint,
    pub(crate) locality: Option<LocalityMap>,
    pub(crate) next_team_id: AtomicU64,
    pub(crate) next_segment_id: AtomicU32,
    pub(crate) pending_async: AtomicUsize,
    finalized: AtomicBool,
}

impl Runtime {
    pub(crate) fn unit(&self) -> UnitId {
        self.endpoint.unit()
    }

    pub(crate) fn check_active(&self) -> Result<()> {
        if self.finalized.load(Ordering::Acquire) {
            return Err(Error::usage("runtime already finalized"));
        }
        Ok(())
    }
}

thread_local! {
    static CURRENT: Cell<Option<(UnitId, usize)>> = const { Cell::new(None) };
}

pub(crate) fn current_unit() -> Option<UnitId> {
    CURRENT.with(|c| c.get().map(|(u, _)| u))
}

/// Global id of the calling unit.
pub fn my_id() -> Result<UnitId> {
    CURRENT
        .with(|c| c.get())
        .map(|(u, _)| u)
        .ok_or_else(|| Error::usage("runtime not initialized on this thread"))
}

/// Number of units in the run.
pub fn n_units() -> Result<usize> {
    CURRENT
        .with(|c| c.get())
        .map(|(_, n)| n)
        .ok_or_else(|| Error::usage("runtime not initialized on this thread"))
}

/// One unit's handle on the runtime. Holds the root team of all units.
pub struct Context {
    rt: Arc<Runtime>,
    root: Team,
    n_units: usize,
    finalized: bool,
}

impl fmt::Debug for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Context")
            .field("unit", &self.rt.unit())
            .field("n_units", &self.n_units)
            .field("transport", &self.rt.endpoint.kind())
            .finish()
    }
}

impl Context {
    /// Initializes this process as one unit of a TCP run, or as the only unit
    /// of an in-process run. Multi-unit in-process runs start through
    /// [`launch`].
    pub fn init(config: &RuntimeConfig) -> Result<Context> {
        config.validate()?;
        match config.transport {
            TransportKind::InProcess => {
                if config.n_units != 1 {
                    return Err(Error::usage(
                        "in-process runs with several units must be started with pgas::launch",
                    ));
                }
                let world = LocalWorld::new(1);
                Context::init_local(&world, UnitId(0), config)
            }
            TransportKind::TcpProcess => {
                let unit = config
                    .unit_id
                    .ok_or_else(|| Error::Startup(format!("TCP unit without an id ({ENV_UNIT_ID})")))?;
                if unit as usize >= config.n_units {
                    return Err(Error::Startup(format!(
                        "unit id {unit} out of range for {} units",
                        config.n_units
                    )));
                }
                let rendezvous = config
                    .rendezvous
                    .as_deref()
                    .ok_or_else(|| Error::Startup(format!("TCP unit without {ENV_RENDEZVOUS}")))?;
                claim_thread(UnitId(unit), config.n_units)?;
                let result = (|| {
                    let segments = Arc::new(SegmentTable::default());
                    let deadline = Instant::now() + config.startup_timeout;
                    let transport =
                        TcpTransport::connect(UnitId(unit), config.n_units, rendezvous, segments.clone(), deadline)?;
                    Context::assemble(Endpoint::new(Box::new(transport), segments), config)
                })();
                if result.is_err() {
                    release_thread();
                }
                result
            }
        }
    }

    pub(crate) fn init_local(world: &Arc<LocalWorld>, unit: UnitId, config: &RuntimeConfig) -> Result<Context> {
        claim_thread(unit, config.n_units)?;
        let segments = world.segments(unit);
        let transport = LocalTransport::new(world.clone(), unit);
        let result = Context::assemble(Endpoint::new(Box::new(transport), segments), config);
        if result.is_err() {
            release_thread();
        }
        result
    }

    fn assemble(endpoint: Endpoint, config: &RuntimeConfig) -> Result<Context> {
        let rt = Arc::new(Runtime {
            endpoint,
            locality: config.locality.clone(),
            next_team_id: AtomicU64::new(1),
            next_segment_id: AtomicU32::new(1),
            pending_async: AtomicUsize::new(0),
            finalized: AtomicBool::new(false),
        });
        let members = (0..config.n_units).map(UnitId::from).collect();
        let root = Team::new(rt.clone(), 0, members, None);
        // Everyone has connected once everyone has entered this barrier.
        root.barrier()?;
        Ok(Context {
            rt,
            root,
            n_units: config.n_units,
            finalized: false,
        })
    }

    pub fn my_id(&self) -> UnitId {
        self.rt.unit()
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    /// The team of all units.
    pub fn team_all(&self) -> &Team {
        &self.root
    }

    pub fn barrier(&self) -> Result<()> {
        self.root.barrier()
    }

    pub fn transport_kind(&self) -> TransportKind {
        self.rt.endpoint.kind()
    }

    /// Remote traffic issued by this unit so far.
    pub fn stats(&self) -> StatsSnapshot {
        self.rt.endpoint.stats().snapshot()
    }

    pub fn locality(&self) -> Option<&LocalityMap> {
        self.rt.locality.as_ref()
    }

    /// Global reference to the element `ptr` points at.
    pub fn deref<T: bytemuck::Pod>(&self, ptr: GlobalPointer<T>) -> GlobalRef<T> {
        GlobalRef::new(self.rt.clone(), ptr)
    }

    /// Native address of `ptr` if it points into this unit's memory.
    pub fn local_ptr<T: bytemuck::Pod>(&self, ptr: GlobalPointer<T>) -> Option<*mut T> {
        crate::memory::local_address(&self.rt, ptr)
    }

    /// Makes all earlier puts of this unit to `target` visible there.
    pub fn flush(&self, target: UnitId) -> Result<()> {
        self.rt.check_active()?;
        self.rt.endpoint.flush(target)
    }

    /// Collective shutdown: waits for all units, then releases every segment
    /// and closes the transport.
    pub fn finalize(&mut self) -> Result<()> {
        if self.finalized {
            return Err(Error::usage("finalize called twice"));
        }
        if cfg!(debug_assertions) {
            let pending = self.rt.pending_async.load(Ordering::Acquire);
            if pending > 0 {
                return Err(Error::usage(format!(
                    "finalize with {pending} outstanding async operation(s)"
                )));
            }
        }
        self.root.barrier()?;
        self.finalized = true;
        self.rt.finalized.store(true, Ordering::Release);
        self.rt.endpoint.shutdown();
        release_thread();
        Ok(())
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }
}

impl Drop for Context {
    fn drop(&mut self) {
        if !self.finalized {
            self.rt.finalized.store(true, Ordering::Release);
            self.rt.endpoint.shutdown();
            release_thread();
        }
    }
}

fn claim_thread(unit: UnitId, n_units: usize) -> Result<()> {
    CURRENT.with(|c| {
        if c.get().is_some() {
            return Err(Error::usage("runtime already initialized on this thread"));
        }
        c.set(Some((unit, n_units)));
        Ok(())
    })
}

fn release_thread() {
    CURRENT.with(|c| c.set(None));
}

/// Runs `f` as an SPMD program on `config.n_units` units, each on its own
/// thread, and returns the per-unit results in unit order.
///
/// For [`TransportKind::TcpProcess`] every unit still connects over TCP; if no
/// rendezvous address is configured a rendezvous is served on an ephemeral
/// loopback port for the duration of startup. The context is finalized after
/// `f` returns.
pub fn launch<R, F>(config: &RuntimeConfig, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(&Context) -> R + Sync,
{
    config.validate()?;
    let n = config.n_units;
    let mut config = config.clone();
    let server = match (config.transport, &config.rendezvous) {
        (TransportKind::TcpProcess, None) => {
            let server = RendezvousServer::bind("127.0.0.1:0")?;
            config.rendezvous = Some(server.local_addr()?.to_string());
            Some(server)
        }
        _ => None,
    };
    let world = LocalWorld::new(n);
    let config = &config;
    let world = &world;
    let f = &f;
    thread::scope(|s| {
        let rendezvous = server.map(|srv| {
            let timeout = config.startup_timeout;
            s.spawn(move || srv.serve(n, timeout))
        });
        let handles: Vec<_> = (0..n)
            .map(|u| {
                thread::Builder::new()
                    .name(format!("unit-{u}"))
                    .spawn_scoped(s, move || run_unit(world, UnitId(u as u32), config, f))
                    .expect("spawn unit thread")
            })
            .collect();
        if let Some(h) = rendezvous {
            h.join().expect("rendezvous thread panicked")?;
        }
        let mut results = Vec::with_capacity(n);
        let mut panic_payload = None;
        for h in handles {
            match h.join() {
                Ok(r) => results.push(r),
                Err(p) => {
                    panic_payload.get_or_insert(p);
                }
            }
        }
        if let Some(p) = panic_payload {
            panic::resume_unwind(p);
        }
        results.into_iter().collect()
    })
}

/// Runs `f` as described by the `PGAS_*` environment the launcher sets up:
/// as one unit of a multi-process run if `PGAS_UNIT_ID` is set, otherwise as
/// all units on threads of this process. Returns the results of the units
/// that ran here, in unit order.
pub fn run<R, F>(f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(&Context) -> R + Sync,
{
    let config = RuntimeConfig::from_env()?;
    match (config.transport, config.unit_id) {
        (TransportKind::TcpProcess, Some(_)) => {
            let mut ctx = Context::init(&config)?;
            let r = f(&ctx);
            ctx.finalize()?;
            Ok(vec![r])
        }
        _ => launch(&config, f),
    }
}

fn run_unit<R, F>(world: &Arc<LocalWorld>, unit: UnitId, config: &RuntimeConfig, f: &F) -> Result<R>
where
    F: Fn(&Context) -> R,
{
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| {
        let mut ctx = match config.transport {
            TransportKind::InProcess => Context::init_local(world, unit, config)?,
            TransportKind::TcpProcess => {
                let mut unit_config = config.clone();
                unit_config.unit_id = Some(unit.0);
                Context::init(&unit_config)?
            }
        };
        let r = f(&ctx);
        ctx.finalize()?;
        Ok(r)
    }));
    match outcome {
        Ok(r) => {
            if r.is_err() {
                world.abandon(unit);
            }
            r
        }
        Err(p) => {
            // Wake peers blocked on this unit so the failure propagates.
            world.abandon(unit);
            release_thread();
            panic::resume_unwind(p)
        }
    }
}
