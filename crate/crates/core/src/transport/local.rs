//! In-process backend: units are threads sharing one address space, remote
//! segments are accessed directly.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::runtime::UnitId;

use super::{ControlKind, Mailbox, PendingGet, SegmentId, SegmentTable, Transport, TransportKind};

struct Slot {
    segments: Arc<SegmentTable>,
    mailbox: Mailbox,
}

/// Shared state of all units of an in-process run.
pub struct LocalWorld {
    slots: Vec<Slot>,
}

impl LocalWorld {
    pub fn new(n_units: usize) -> Arc<LocalWorld> {
        Arc::new(LocalWorld {
            slots: (0..n_units)
                .map(|_| Slot {
                    segments: Arc::new(SegmentTable::default()),
                    mailbox: Mailbox::new(),
                })
                .collect(),
        })
    }

    pub fn n_units(&self) -> usize {
        self.slots.len()
    }

    /// Declares `unit` dead: every receive waiting on it fails from now on.
    pub fn abandon(&self, unit: UnitId) {
        for slot in &self.slots {
            slot.mailbox.peer_lost(unit.0);
        }
    }

    pub fn segments(&self, unit: UnitId) -> Arc<SegmentTable> {
        self.slots[unit.index()].segments.clone()
    }
}

pub struct LocalTransport {
    world: Arc<LocalWorld>,
    me: UnitId,
}

impl LocalTransport {
    pub fn new(world: Arc<LocalWorld>, me: UnitId) -> LocalTransport {
        LocalTransport { world, me }
    }

    fn slot(&self, unit: UnitId) -> &Slot {
        &self.world.slots[unit.index()]
    }
}

impl Transport for LocalTransport {
    fn unit(&self) -> UnitId {
        self.me
    }

    fn n_units(&self) -> usize {
        self.world.n_units()
    }

    fn kind(&self) -> TransportKind {
        TransportKind::InProcess
    }

    fn put(&self, target: UnitId, segment: SegmentId, offset: u64, data: &[u8]) -> Result<()> {
        let seg = self.slot(target).segments.get(segment).ok_or(Error::UnknownSegment {
            unit: target.0,
            segment: segment.0,
        })?;
        seg.write(offset as usize, data);
        Ok(())
    }

    fn get(&self, source: UnitId, segment: SegmentId, offset: u64, len: usize) -> Result<PendingGet> {
        let seg = self.slot(source).segments.get(segment).ok_or(Error::UnknownSegment {
            unit: source.0,
            segment: segment.0,
        })?;
        let mut out = vec![0u8; len];
        seg.read(offset as usize, &mut out);
        Ok(PendingGet::Ready(out))
    }

    fn flush(&self, _target: UnitId) -> Result<()> {
        // Puts are applied synchronously.
        Ok(())
    }

    fn flush_all(&self) -> Result<()> {
        Ok(())
    }

    fn send_control(&self, target: UnitId, _kind: ControlKind, tag: u64, payload: Vec<u8>) -> Result<()> {
        self.slot(target).mailbox.deliver(self.me.0, tag, payload);
        Ok(())
    }

    fn mailbox(&self) -> &Mailbox {
        &self.slot(self.me).mailbox
    }

    fn shutdown(&self) {
        self.slot(self.me).segments.clear();
    }
}
