//! TCP backend: one process per unit.
//!
//! Each unit keeps one outgoing connection per peer for the requests it
//! initiates, plus a reader thread on that connection collecting `GET_REPLY`
//! and `FLUSH_ACK` frames. Incoming connections are served by one hidden
//! service thread each, which applies puts, answers gets and flushes, and
//! files control messages into the mailbox without involving the
//! application thread. Replies on a connection come back in request order, so
//! the initiator matches them against a FIFO of waiting slots.

use std::collections::VecDeque;
use std::io::{BufReader, BufWriter, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::runtime::UnitId;

use super::frame::{write_frame, Frame, Opcode, ReplyStatus};
use super::rendezvous::{self, HELLO_TAG};
use super::{ControlKind, Mailbox, PendingGet, ReplySlot, SegmentId, SegmentTable, Transport, TransportKind};

/// Slots awaiting a reply on one connection; `closed` is set once the reply
/// stream has ended and carries the reason.
#[derive(Default)]
struct ReplyQueue {
    slots: VecDeque<Arc<ReplySlot>>,
    closed: Option<String>,
}

type Pending = Arc<Mutex<ReplyQueue>>;

struct Peer {
    writer: Mutex<BufWriter<TcpStream>>,
    pending: Pending,
    stream: TcpStream,
}

pub struct TcpTransport {
    me: UnitId,
    n_units: usize,
    mailbox: Arc<Mailbox>,
    peers: Vec<Option<Peer>>,
    dirty: Vec<AtomicBool>,
    closed: AtomicBool,
}

impl TcpTransport {
    /// Performs the rendezvous handshake and connects to every peer.
    pub fn connect(
        me: UnitId,
        n_units: usize,
        rendezvous_addr: &str,
        segments: Arc<SegmentTable>,
        deadline: Instant,
    ) -> Result<TcpTransport> {
        let rv = rendezvous::connect_with_retry(rendezvous_addr, deadline)?;
        // Listen on the interface that reaches the rendezvous.
        let ip = rv.local_addr()?.ip();
        let listener = TcpListener::bind((ip, 0))?;
        let table = rendezvous::exchange_on(rv, me.0, n_units, listener.local_addr()?, deadline)?;

        let mailbox = Arc::new(Mailbox::new());
        {
            let mailbox = mailbox.clone();
            let expected = n_units - 1;
            thread::Builder::new()
                .name(format!("pgas-accept-{}", me.0))
                .spawn(move || accept_loop(listener, expected, segments, mailbox))?;
        }

        let mut peers = Vec::with_capacity(n_units);
        for (unit, addr) in table.iter().enumerate() {
            if unit == me.index() {
                peers.push(None);
                continue;
            }
            let stream = rendezvous::connect_with_retry(&addr.to_string(), deadline)?;
            let mut writer = BufWriter::with_capacity(1 << 16, stream.try_clone()?);
            write_frame(&mut writer, Opcode::Ctrl, 0, me.0, HELLO_TAG, 0, &[])?;
            writer.flush()?;
            let pending: Pending = Arc::default();
            {
                let pending = pending.clone();
                let reader = stream.try_clone()?;
                thread::Builder::new()
                    .name(format!("pgas-reply-{}-{}", me.0, unit))
                    .spawn(move || reply_loop(reader, pending))?;
            }
            peers.push(Some(Peer {
                writer: Mutex::new(writer),
                pending,
                stream,
            }));
        }
        Ok(TcpTransport {
            me,
            n_units,
            mailbox,
            peers,
            dirty: (0..n_units).map(|_| AtomicBool::new(false)).collect(),
            closed: AtomicBool::new(false),
        })
    }

    fn peer(&self, unit: UnitId) -> Result<&Peer> {
        if self.closed.load(Ordering::Acquire) {
            return Err(Error::usage("transport is shut down"));
        }
        self.peers
            .get(unit.index())
            .and_then(|p| p.as_ref())
            .ok_or_else(|| Error::Transport(format!("no connection to unit {unit}")))
    }

    /// Queues a request expecting a reply and pushes it onto the wire.
    fn request(&self, peer: &Peer, opcode: Opcode, segment: SegmentId, offset: u64, len: u32) -> Result<Arc<ReplySlot>> {
        let slot = Arc::new(ReplySlot::default());
        let mut w = peer.writer.lock().unwrap();
        {
            let mut queue = peer.pending.lock().unwrap();
            if let Some(reason) = &queue.closed {
                return Err(Error::Transport(reason.clone()));
            }
            queue.slots.push_back(slot.clone());
        }
        write_frame(&mut *w, opcode, segment.0, self.me.0, offset, len, &[])?;
        w.flush()?;
        Ok(slot)
    }

    fn start_flush(&self, target: UnitId) -> Result<Option<Arc<ReplySlot>>> {
        if !self.dirty[target.index()].swap(false, Ordering::AcqRel) {
            return Ok(None);
        }
        let peer = self.peer(target)?;
        self.request(peer, Opcode::Flush, SegmentId(0), 0, 0).map(Some)
    }
}

impl Transport for TcpTransport {
    fn unit(&self) -> UnitId {
        self.me
    }

    fn n_units(&self) -> usize {
        self.n_units
    }

    fn kind(&self) -> TransportKind {
        TransportKind::TcpProcess
    }

    fn put(&self, target: UnitId, segment: SegmentId, offset: u64, data: &[u8]) -> Result<()> {
        let peer = self.peer(target)?;
        let mut w = peer.writer.lock().unwrap();
        write_frame(&mut *w, Opcode::Put, segment.0, self.me.0, offset, data.len() as u32, data)?;
        self.dirty[target.index()].store(true, Ordering::Release);
        Ok(())
    }

    fn get(&self, source: UnitId, segment: SegmentId, offset: u64, len: usize) -> Result<PendingGet> {
        let peer = self.peer(source)?;
        let slot = self.request(peer, Opcode::Get, segment, offset, len as u32)?;
        Ok(PendingGet::Waiting(slot))
    }

    fn flush(&self, target: UnitId) -> Result<()> {
        // Unconditional: the caller asked for an explicit round trip.
        self.dirty[target.index()].store(true, Ordering::Release);
        if let Some(slot) = self.start_flush(target)? {
            slot.wait()?;
        }
        Ok(())
    }

    fn flush_all(&self) -> Result<()> {
        let mut waiting = Vec::new();
        for unit in 0..self.n_units {
            if unit != self.me.index() {
                if let Some(slot) = self.start_flush(UnitId(unit as u32))? {
                    waiting.push(slot);
                }
            }
        }
        for slot in waiting {
            slot.wait()?;
        }
        Ok(())
    }

    fn send_control(&self, target: UnitId, kind: ControlKind, tag: u64, payload: Vec<u8>) -> Result<()> {
        let peer = self.peer(target)?;
        let opcode = match kind {
            ControlKind::Barrier => Opcode::Barrier,
            ControlKind::Collective => Opcode::Ctrl,
        };
        let mut w = peer.writer.lock().unwrap();
        write_frame(&mut *w, opcode, 0, self.me.0, tag, payload.len() as u32, &payload)?;
        w.flush()?;
        Ok(())
    }

    fn mailbox(&self) -> &Mailbox {
        &self.mailbox
    }

    fn shutdown(&self) {
        if self.closed.swap(true, Ordering::AcqRel) {
            return;
        }
        for peer in self.peers.iter().flatten() {
            if let Ok(mut w) = peer.writer.lock() {
                let _ = w.flush();
            }
            let _ = peer.stream.shutdown(Shutdown::Write);
        }
    }
}

impl Drop for TcpTransport {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn accept_loop(listener: TcpListener, expected: usize, segments: Arc<SegmentTable>, mailbox: Arc<Mailbox>) {
    for _ in 0..expected {
        match listener.accept() {
            Ok((stream, _)) => {
                let _ = stream.set_nodelay(true);
                let segments = segments.clone();
                let mailbox = mailbox.clone();
                let spawned = thread::Builder::new()
                    .name("pgas-service".into())
                    .spawn(move || {
                        if let Err(e) = serve_connection(stream, &segments, &mailbox) {
                            log::debug!("service connection ended: {e}");
                        }
                    });
                if let Err(e) = spawned {
                    log::error!("cannot spawn service thread: {e}");
                }
            }
            Err(e) => {
                log::error!("accept failed: {e}");
                return;
            }
        }
    }
}

/// Serves requests arriving from one peer until it closes the connection.
fn serve_connection(stream: TcpStream, segments: &SegmentTable, mailbox: &Mailbox) -> Result<()> {
    let mut reader = BufReader::with_capacity(1 << 16, stream.try_clone()?);
    let mut writer = BufWriter::with_capacity(1 << 16, stream);
    let hello = Frame::read_from(&mut reader)?
        .ok_or_else(|| Error::Transport("peer closed before hello".into()))?;
    if hello.opcode != Opcode::Ctrl || hello.offset != HELLO_TAG {
        return Err(Error::Transport("expected hello frame".into()));
    }
    let source = hello.unit;
    let result = serve_requests(source, &mut reader, &mut writer, segments, mailbox);
    mailbox.peer_lost(source);
    let _ = writer.flush();
    let _ = writer.get_ref().shutdown(Shutdown::Both);
    result
}

fn serve_requests(
    source: u32,
    reader: &mut BufReader<TcpStream>,
    writer: &mut BufWriter<TcpStream>,
    segments: &SegmentTable,
    mailbox: &Mailbox,
) -> Result<()> {
    while let Some(frame) = Frame::read_from(reader)? {
        match frame.opcode {
            Opcode::Put => match segments.get(SegmentId(frame.segment)) {
                Some(seg) if frame.offset as usize + frame.payload.len() <= seg.len() => {
                    seg.write(frame.offset as usize, &frame.payload)
                }
                _ => log::warn!(
                    "dropping put from unit {source} to segment {} at offset {}",
                    frame.segment,
                    frame.offset
                ),
            },
            Opcode::Get => {
                let len = frame.len as usize;
                let (status, data) = match segments.get(SegmentId(frame.segment)) {
                    Some(seg) if frame.offset as usize + len <= seg.len() => {
                        let mut data = vec![0u8; len];
                        seg.read(frame.offset as usize, &mut data);
                        (ReplyStatus::Ok, data)
                    }
                    Some(_) => (ReplyStatus::OutOfRange, Vec::new()),
                    None => (ReplyStatus::UnknownSegment, Vec::new()),
                };
                write_frame(writer, Opcode::GetReply, frame.segment, source, status as u64, data.len() as u32, &data)?;
            }
            Opcode::Flush => write_frame(writer, Opcode::FlushAck, 0, source, 0, 0, &[])?,
            Opcode::Barrier | Opcode::Ctrl => mailbox.deliver(source, frame.offset, frame.payload),
            Opcode::GetReply | Opcode::FlushAck => {
                return Err(Error::Transport(format!("unexpected {:?} on a request stream", frame.opcode)))
            }
        }
        // Batch replies while more requests are already buffered.
        if reader.buffer().is_empty() {
            writer.flush()?;
        }
    }
    Ok(())
}

fn reply_loop(stream: TcpStream, pending: Pending) {
    let mut reader = BufReader::with_capacity(1 << 16, stream);
    let failure = loop {
        match Frame::read_from(&mut reader) {
            Ok(Some(frame)) => {
                let Some(slot) = pending.lock().unwrap().slots.pop_front() else {
                    break format!("unsolicited {:?}", frame.opcode);
                };
                let value = match (frame.opcode, ReplyStatus::from_code(frame.offset)) {
                    (Opcode::GetReply, ReplyStatus::Ok) | (Opcode::FlushAck, _) => Ok(frame.payload),
                    (Opcode::GetReply, ReplyStatus::UnknownSegment) => Err(Error::UnknownSegment {
                        unit: u32::MAX,
                        segment: frame.segment,
                    }),
                    (Opcode::GetReply, _) => Err(Error::Transport(format!(
                        "remote range check failed on segment {}",
                        frame.segment
                    ))),
                    (op, _) => Err(Error::Transport(format!("unexpected reply {op:?}"))),
                };
                slot.fulfill(value);
            }
            Ok(None) => break "connection closed".to_string(),
            Err(e) => break e.to_string(),
        }
    };
    let mut queue = pending.lock().unwrap();
    for slot in queue.slots.drain(..) {
        slot.fulfill(Err(Error::Transport(failure.clone())));
    }
    queue.closed = Some(failure);
}
