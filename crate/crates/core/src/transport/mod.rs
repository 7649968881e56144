//! One-sided communication substrate.
//!
//! A [`Transport`] moves bytes between registered segments of different units
//! and delivers control messages. Two backends exist: [`local`] for units that
//! are threads of one process and [`tcp`] for units that are separate
//! processes. [`Endpoint`] sits in front of either backend and owns what they
//! share: range checks against the segment-length table, the self-access
//! shortcut and traffic counters.

pub mod frame;
pub mod local;
pub mod mailbox;
pub mod rendezvous;
pub mod segment;
pub mod tcp;

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock};

use crate::error::{Error, Result};
use crate::runtime::UnitId;

pub use mailbox::Mailbox;
pub use segment::Segment;

/// Identifier of a collectively registered memory segment. Segment 0 is
/// reserved for the runtime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SegmentId(pub u16);

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Segments registered by one unit.
#[derive(Default)]
pub struct SegmentTable {
    segments: RwLock<HashMap<SegmentId, Arc<Segment>>>,
}

impl SegmentTable {
    pub fn insert(&self, id: SegmentId, segment: Arc<Segment>) {
        self.segments.write().unwrap().insert(id, segment);
    }

    pub fn remove(&self, id: SegmentId) -> Option<Arc<Segment>> {
        self.segments.write().unwrap().remove(&id)
    }

    pub fn get(&self, id: SegmentId) -> Option<Arc<Segment>> {
        self.segments.read().unwrap().get(&id).cloned()
    }

    pub fn clear(&self) {
        self.segments.write().unwrap().clear();
    }

    pub fn len(&self) -> usize {
        self.segments.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Control message flavour; selects the frame opcode on the wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControlKind {
    Barrier,
    Collective,
}

/// Which backend carries the traffic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransportKind {
    InProcess,
    TcpProcess,
}

impl TransportKind {
    pub fn name(self) -> &'static str {
        match self {
            TransportKind::InProcess => "in_process",
            TransportKind::TcpProcess => "tcp_process",
        }
    }
}

/// Counters of remote traffic issued by one unit. Accesses to the unit's own
/// memory are not counted.
#[derive(Debug, Default)]
pub struct TransportStats {
    pub puts: AtomicU64,
    pub put_bytes: AtomicU64,
    pub gets: AtomicU64,
    pub get_bytes: AtomicU64,
    pub flushes: AtomicU64,
    pub control_messages: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StatsSnapshot {
    pub puts: u64,
    pub put_bytes: u64,
    pub gets: u64,
    pub get_bytes: u64,
    pub flushes: u64,
    pub control_messages: u64,
}

impl StatsSnapshot {
    /// Put and get operations, i.e. everything except synchronization.
    pub fn data_ops(&self) -> u64 {
        self.puts + self.gets
    }

    pub fn since(&self, earlier: &StatsSnapshot) -> StatsSnapshot {
        StatsSnapshot {
            puts: self.puts - earlier.puts,
            put_bytes: self.put_bytes - earlier.put_bytes,
            gets: self.gets - earlier.gets,
            get_bytes: self.get_bytes - earlier.get_bytes,
            flushes: self.flushes - earlier.flushes,
            control_messages: self.control_messages - earlier.control_messages,
        }
    }
}

impl TransportStats {
    pub fn snapshot(&self) -> StatsSnapshot {
        StatsSnapshot {
            puts: self.puts.load(Ordering::Relaxed),
            put_bytes: self.put_bytes.load(Ordering::Relaxed),
            gets: self.gets.load(Ordering::Relaxed),
            get_bytes: self.get_bytes.load(Ordering::Relaxed),
            flushes: self.flushes.load(Ordering::Relaxed),
            control_messages: self.control_messages.load(Ordering::Relaxed),
        }
    }
}

/// Single-use slot a reply is delivered into.
#[derive(Default)]
pub struct ReplySlot {
    value: Mutex<Option<Result<Vec<u8>>>>,
    ready: Condvar,
}

impl ReplySlot {
    pub fn fulfill(&self, value: Result<Vec<u8>>) {
        *self.value.lock().unwrap() = Some(value);
        self.ready.notify_all();
    }

    pub fn wait(&self) -> Result<Vec<u8>> {
        let mut guard = self.value.lock().unwrap();
        loop {
            if let Some(v) = guard.take() {
                return v;
            }
            guard = self.ready.wait(guard).unwrap();
        }
    }
}

/// A get that may still be in flight.
pub enum PendingGet {
    Ready(Vec<u8>),
    Waiting(Arc<ReplySlot>),
}

impl PendingGet {
    pub fn wait(self) -> Result<Vec<u8>> {
        match self {
            PendingGet::Ready(bytes) => Ok(bytes),
            PendingGet::Waiting(slot) => slot.wait(),
        }
    }
}

/// Backend interface. Ranges have been validated by [`Endpoint`] before any of
/// these are called, and `target != self` for data operations.
pub trait Transport: Send + Sync {
    fn unit(&self) -> UnitId;

    fn n_units(&self) -> usize;

    fn kind(&self) -> TransportKind;

    /// Copies `data` out before returning (local completion).
    fn put(&self, target: UnitId, segment: SegmentId, offset: u64, data: &[u8]) -> Result<()>;

    fn get(&self, source: UnitId, segment: SegmentId, offset: u64, len: usize) -> Result<PendingGet>;

    /// Returns once all earlier puts to `target` are applied at the target.
    fn flush(&self, target: UnitId) -> Result<()>;

    /// [`Transport::flush`] for every target with puts since its last flush.
    fn flush_all(&self) -> Result<()>;

    fn send_control(&self, target: UnitId, kind: ControlKind, tag: u64, payload: Vec<u8>) -> Result<()>;

    fn mailbox(&self) -> &Mailbox;

    fn shutdown(&self);
}

/// The unit-side view of the transport: local segment registry, the table of
/// every unit's segment lengths, and a backend.
pub struct Endpoint {
    me: UnitId,
    segments: Arc<SegmentTable>,
    lengths: RwLock<HashMap<SegmentId, Vec<Option<u64>>>>,
    backend: Box<dyn Transport>,
    stats: TransportStats,
}

impl Endpoint {
    pub fn new(backend: Box<dyn Transport>, segments: Arc<SegmentTable>) -> Endpoint {
        Endpoint {
            me: backend.unit(),
            segments,
            lengths: RwLock::new(HashMap::new()),
            backend,
            stats: TransportStats::default(),
        }
    }

    pub fn unit(&self) -> UnitId {
        self.me
    }

    pub fn n_units(&self) -> usize {
        self.backend.n_units()
    }

    pub fn kind(&self) -> TransportKind {
        self.backend.kind()
    }

    pub fn stats(&self) -> &TransportStats {
        &self.stats
    }

    /// Registers the local part of segment `id`. `lengths[u]` is the byte
    /// length on global unit `u` (`None` for units outside the allocating team).
    pub fn attach(&self, id: SegmentId, lengths: Vec<Option<u64>>) -> Arc<Segment> {
        let mine = lengths[self.me.index()].unwrap_or(0) as usize;
        let segment = Arc::new(Segment::new(mine));
        self.segments.insert(id, segment.clone());
        self.lengths.write().unwrap().insert(id, lengths);
        segment
    }

    pub fn detach(&self, id: SegmentId) {
        self.segments.remove(id);
        self.lengths.write().unwrap().remove(&id);
    }

    pub fn local_segment(&self, id: SegmentId) -> Option<Arc<Segment>> {
        self.segments.get(id)
    }

    pub fn registered_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn detach_all(&self) {
        self.segments.clear();
        self.lengths.write().unwrap().clear();
    }

    fn check_range(&self, unit: UnitId, segment: SegmentId, offset: u64, len: usize) -> Result<()> {
        let lengths = self.lengths.read().unwrap();
        let per_unit = lengths.get(&segment).ok_or(Error::UnknownSegment {
            unit: unit.0,
            segment: segment.0,
        })?;
        let length = per_unit
            .get(unit.index())
            .copied()
            .flatten()
            .ok_or(Error::UnknownSegment {
                unit: unit.0,
                segment: segment.0,
            })?;
        let end = offset.saturating_add(len as u64);
        // An empty access is valid anywhere inside or at the end of the segment,
        // except on a unit that holds no memory at all.
        if end > length || offset >= length && (len > 0 || length == 0) {
            return Err(Error::OutOfRange {
                unit: unit.0,
                segment: segment.0,
                offset,
                end,
                length,
            });
        }
        Ok(())
    }

    pub fn put(&self, target: UnitId, segment: SegmentId, offset: u64, data: &[u8]) -> Result<()> {
        self.check_range(target, segment, offset, data.len())?;
        if target == self.me {
            let seg = self.local_segment(segment).ok_or(Error::UnknownSegment {
                unit: target.0,
                segment: segment.0,
            })?;
            seg.write(offset as usize, data);
            return Ok(());
        }
        self.stats.puts.fetch_add(1, Ordering::Relaxed);
        self.stats.put_bytes.fetch_add(data.len() as u64, Ordering::Relaxed);
        self.backend.put(target, segment, offset, data)
    }

    pub fn get_start(&self, source: UnitId, segment: SegmentId, offset: u64, len: usize) -> Result<PendingGet> {
        self.check_range(source, segment, offset, len)?;
        if source == self.me {
            let seg = self.local_segment(segment).ok_or(Error::UnknownSegment {
                unit: source.0,
                segment: segment.0,
            })?;
            let mut out = vec![0u8; len];
            seg.read(offset as usize, &mut out);
            return Ok(PendingGet::Ready(out));
        }
        self.stats.gets.fetch_add(1, Ordering::Relaxed);
        self.stats.get_bytes.fetch_add(len as u64, Ordering::Relaxed);
        self.backend.get(source, segment, offset, len)
    }

    pub fn get(&self, source: UnitId, segment: SegmentId, offset: u64, into: &mut [u8]) -> Result<()> {
        let bytes = self.get_start(source, segment, offset, into.len())?.wait()?;
        into.copy_from_slice(&bytes);
        Ok(())
    }

    pub fn flush(&self, target: UnitId) -> Result<()> {
        if target == self.me {
            return Ok(());
        }
        self.stats.flushes.fetch_add(1, Ordering::Relaxed);
        self.backend.flush(target)
    }

    pub fn flush_all(&self) -> Result<()> {
        self.backend.flush_all()
    }

    pub fn send_control(&self, target: UnitId, kind: ControlKind, tag: u64, payload: Vec<u8>) -> Result<()> {
        self.stats.control_messages.fetch_add(1, Ordering::Relaxed);
        if target == self.me {
            self.backend.mailbox().deliver(self.me.0, tag, payload);
            return Ok(());
        }
        self.backend.send_control(target, kind, tag, payload)
    }

    pub fn receive_control(&self, source: UnitId, tag: u64) -> Result<Vec<u8>> {
        self.backend.mailbox().receive(source.0, tag)
    }

    pub fn shutdown(&self) {
        self.backend.shutdown();
        self.detach_all();
    }
}
