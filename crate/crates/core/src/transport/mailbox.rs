//! Per-unit inbox for control messages (barrier rounds, collective payloads).

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{Condvar, Mutex};

use crate::error::{Error, Result};

#[derive(Default)]
struct Inbox {
    queues: HashMap<(u32, u64), VecDeque<Vec<u8>>>,
    lost: HashSet<u32>,
    closed: bool,
}

#[derive(Default)]
pub struct Mailbox {
    inbox: Mutex<Inbox>,
    arrived: Condvar,
}

impl Mailbox {
    pub fn new() -> Mailbox {
        Mailbox::default()
    }

    pub fn deliver(&self, source: u32, tag: u64, payload: Vec<u8>) {
        let mut inbox = self.inbox.lock().unwrap();
        inbox.queues.entry((source, tag)).or_default().push_back(payload);
        self.arrived.notify_all();
    }

    /// Blocks until a message with `tag` from `source` arrives.
    pub fn receive(&self, source: u32, tag: u64) -> Result<Vec<u8>> {
        let mut inbox = self.inbox.lock().unwrap();
        loop {
            if let Some(queue) = inbox.queues.get_mut(&(source, tag)) {
                if let Some(msg) = queue.pop_front() {
                    if queue.is_empty() {
                        inbox.queues.remove(&(source, tag));
                    }
                    return Ok(msg);
                }
            }
            if inbox.lost.contains(&source) {
                return Err(Error::Transport(format!(
                    "connection to unit {source} lost while waiting for a message"
                )));
            }
            if inbox.closed {
                return Err(Error::usage("mailbox closed: runtime finalized"));
            }
            inbox = self.arrived.wait(inbox).unwrap();
        }
    }

    /// Marks `source` as gone; pending and future receives from it fail.
    pub fn peer_lost(&self, source: u32) {
        self.inbox.lock().unwrap().lost.insert(source);
        self.arrived.notify_all();
    }

    pub fn close(&self) {
        self.inbox.lock().unwrap().closed = true;
        self.arrived.notify_all();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;
    use std::thread;

    #[test]
    fn messages_are_matched_by_source_and_tag() {
        let mb = Mailbox::new();
        mb.deliver(1, 7, vec![1]);
        mb.deliver(2, 7, vec![2]);
        mb.deliver(1, 8, vec![3]);
        mb.deliver(1, 7, vec![4]);
        assert_eq!(mb.receive(1, 8).unwrap(), vec![3]);
        assert_eq!(mb.receive(1, 7).unwrap(), vec![1]);
        assert_eq!(mb.receive(1, 7).unwrap(), vec![4]);
        assert_eq!(mb.receive(2, 7).unwrap(), vec![2]);
    }

    #[test]
    fn receive_blocks_until_delivery() {
        let mb = Arc::new(Mailbox::new());
        let mb2 = mb.clone();
        let h = thread::spawn(move || mb2.receive(0, 1).unwrap());
        thread::sleep(std::time::Duration::from_millis(20));
        mb.deliver(0, 1, vec![42]);
        assert_eq!(h.join().unwrap(), vec![42]);
    }

    #[test]
    fn lost_peer_fails_receive() {
        let mb = Mailbox::new();
        mb.peer_lost(3);
        assert!(matches!(mb.receive(3, 0), Err(Error::Transport(_))));
    }
}
