//! Teams and the collective operations scoped to them.
//!
//! Every collective is built from two primitives over the transport's control
//! channel: a dissemination barrier and a gather-to-first-member followed by a
//! fan-out of the assembled result ([`Team::allgather_bytes`]). Results that
//! fold contributions therefore always fold in rank order.
//!
//! In debug builds each collective attaches a hash of its kind and arguments;
//! members that disagree get [`Error::Usage`] instead of silently mixing
//! unrelated calls.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use bytemuck::Pod;

use crate::error::{Error, Result};
use crate::transport::ControlKind;

use super::{Runtime, UnitId};

/// Collective-argument fingerprint. Zero (no check) in release builds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Check(u64);

impl Check {
    pub const NONE: Check = Check(0);

    pub fn of(kind: &str, args: &[u8]) -> Check {
        if !cfg!(debug_assertions) {
            return Check::NONE;
        }
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in kind.as_bytes().iter().chain([0xffu8].iter()).chain(args) {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        Check(h | 1)
    }
}

pub(crate) struct TeamInner {
    pub(crate) id: u64,
    pub(crate) members: Vec<UnitId>,
    pub(crate) parent: Option<u64>,
    pub(crate) position: usize,
    seq: AtomicU64,
    pub(crate) rt: Arc<Runtime>,
}

/// An ordered set of units. Not `Clone`: a team stands for the resources of
/// its members and can only be moved.
pub struct Team {
    pub(crate) inner: Arc<TeamInner>,
}

impl fmt::Debug for Team {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Team")
            .field("id", &self.inner.id)
            .field("members", &self.inner.members)
            .field("parent", &self.inner.parent)
            .finish()
    }
}

impl Team {
    pub(crate) fn new(rt: Arc<Runtime>, id: u64, members: Vec<UnitId>, parent: Option<u64>) -> Team {
        let me = rt.unit();
        let position = members
            .iter()
            .position(|&u| u == me)
            .expect("team built for a non-member");
        Team {
            inner: Arc::new(TeamInner {
                id,
                members,
                parent,
                position,
                seq: AtomicU64::new(0),
                rt,
            }),
        }
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn parent_id(&self) -> Option<u64> {
        self.inner.parent
    }

    pub fn size(&self) -> usize {
        self.inner.members.len()
    }

    /// Zero-based rank of the calling unit within this team.
    pub fn my_id(&self) -> UnitId {
        UnitId(self.inner.position as u32)
    }

    /// Global unit ids of the members, in rank order.
    pub fn members(&self) -> &[UnitId] {
        &self.inner.members
    }

    /// Global id of the member with team rank `rank`.
    pub fn global_id(&self, rank: UnitId) -> Result<UnitId> {
        self.inner.members.get(rank.index()).copied().ok_or_else(|| {
            Error::usage(format!("rank {rank} out of range for team of {}", self.size()))
        })
    }

    /// Team rank of global unit `unit`, if it is a member.
    pub fn rank_of(&self, unit: UnitId) -> Option<UnitId> {
        self.inner.members.iter().position(|&u| u == unit).map(|p| UnitId(p as u32))
    }

    pub(crate) fn shared(&self) -> Arc<TeamInner> {
        self.inner.clone()
    }

    pub fn barrier(&self) -> Result<()> {
        self.inner.barrier(Check::of("barrier", &[]))
    }

    /// Creates `n` child teams of near-equal size with contiguous rank ranges
    /// and returns the one containing the caller. The first `size % n`
    /// children get one extra member.
    pub fn split(&self, n: usize) -> Result<Team> {
        let size = self.size();
        if n == 0 || n > size {
            return Err(Error::usage(format!("cannot split a team of {size} into {n} parts")));
        }
        let ranges = split_ranges(size, n);
        let k = ranges
            .iter()
            .position(|r| r.contains(&self.inner.position))
            .expect("ranges cover the team");
        let base = self.inner.allocate_team_ids(n as u64, Check::of("split", &(n as u64).to_le_bytes()))?;
        let members = self.inner.members[ranges[k].clone()].to_vec();
        Ok(Team::new(self.inner.rt.clone(), base + k as u64, members, Some(self.inner.id)))
    }

    /// Splits along the groups of the configured locality map at `level`.
    pub fn split_locality(&self, level: usize) -> Result<Team> {
        let rt = &self.inner.rt;
        let map = rt
            .locality
            .as_ref()
            .ok_or_else(|| Error::Locality("no locality map configured".into()))?;
        let groups = map.groups(level)?;
        let mine = map.group_of(level, rt.unit().0)?;
        // Children are the groups that intersect this team, in map order.
        let occupied: Vec<usize> = (0..groups.len())
            .filter(|&g| self.inner.members.iter().any(|u| groups[g].contains(&u.0)))
            .collect();
        let k = occupied.iter().position(|&g| g == mine).expect("caller's group is occupied");
        let base = self
            .inner
            .allocate_team_ids(occupied.len() as u64, Check::of("split_locality", &(level as u64).to_le_bytes()))?;
        let members = self
            .inner
            .members
            .iter()
            .copied()
            .filter(|u| groups[mine].contains(&u.0))
            .collect();
        Ok(Team::new(rt.clone(), base + k as u64, members, Some(self.inner.id)))
    }

    /// Gathers one byte string per member, in rank order, on every member.
    pub fn allgather_bytes(&self, payload: &[u8]) -> Result<Vec<Vec<u8>>> {
        self.inner.allgather(payload.to_vec(), Check::of("allgather", &[]))
    }

    pub fn allgather<T: Pod>(&self, value: T) -> Result<Vec<T>> {
        self.inner.allgather_values(value, Check::of("allgather", &[]))
    }

    /// Combines every member's value with `combine`, folding left in rank
    /// order; all members receive the result.
    pub fn reduce<T: Pod>(&self, value: T, combine: impl Fn(T, T) -> T) -> Result<T> {
        let check = Check::of("reduce", &(std::mem::size_of::<T>() as u64).to_le_bytes());
        let all = self.inner.allgather_values(value, check)?;
        Ok(all.into_iter().reduce(combine).expect("team is never empty"))
    }

    /// Every member returns the value contributed by team rank `root`.
    pub fn broadcast<T: Pod>(&self, root: UnitId, value: T) -> Result<T> {
        if root.index() >= self.size() {
            return Err(Error::usage(format!("broadcast root {root} not in team of {}", self.size())));
        }
        let check = Check::of("broadcast", &root.0.to_le_bytes());
        let all = self.inner.allgather_values(value, check)?;
        Ok(all[root.index()])
    }
}

/// Contiguous rank ranges of an `n`-way split of `size` ranks.
pub fn split_ranges(size: usize, n: usize) -> Vec<std::ops::Range<usize>> {
    let (q, r) = (size / n, size % n);
    let mut start = 0;
    (0..n)
        .map(|k| {
            let len = q + usize::from(k < r);
            let range = start..start + len;
            start += len;
            range
        })
        .collect()
}

// Barrier rounds use PHASE_BARRIER | round.
const PHASE_BARRIER: u64 = 0x80;
const PHASE_GATHER: u64 = 2;
const PHASE_RESULT: u64 = 3;

impl TeamInner {
    fn check_caller(&self) -> Result<()> {
        self.rt.check_active()?;
        if let Some(unit) = super::current_unit() {
            if unit != self.rt.unit() {
                return Err(Error::usage(format!(
                    "team of unit {} used from unit {unit}",
                    self.rt.unit()
                )));
            }
        }
        Ok(())
    }

    fn next_seq(&self) -> u64 {
        self.seq.fetch_add(1, Ordering::Relaxed)
    }

    fn tag(&self, seq: u64, phase: u64) -> u64 {
        (self.id << 40) | ((seq & 0xffff_ffff) << 8) | phase
    }

    /// Dissemination barrier. Flushes outstanding puts first so that data
    /// written before the barrier is visible after it.
    pub(crate) fn barrier(&self, check: Check) -> Result<()> {
        self.check_caller()?;
        let ep = &self.rt.endpoint;
        ep.flush_all()?;
        let n = self.members.len();
        if n == 1 {
            return Ok(());
        }
        let seq = self.next_seq();
        let mut mismatch = false;
        let mut distance = 1;
        let mut round = 0u64;
        while distance < n {
            let to = self.members[(self.position + distance) % n];
            let from = self.members[(self.position + n - distance) % n];
            let round_tag = self.tag(seq, PHASE_BARRIER | round);
            ep.send_control(to, ControlKind::Barrier, round_tag, check.0.to_le_bytes().to_vec())?;
            let msg = ep.receive_control(from, round_tag)?;
            if msg.len() != 8 || u64::from_le_bytes(msg[..8].try_into().unwrap()) != check.0 {
                mismatch = true;
            }
            distance *= 2;
            round += 1;
        }
        if mismatch {
            return Err(Error::usage("mismatched collective calls at barrier"));
        }
        Ok(())
    }

    /// Gathers at rank 0, which checks the fingerprints and sends the
    /// assembled table back to every member.
    pub(crate) fn allgather(&self, payload: Vec<u8>, check: Check) -> Result<Vec<Vec<u8>>> {
        self.check_caller()?;
        let n = self.members.len();
        if n == 1 {
            return Ok(vec![payload]);
        }
        let ep = &self.rt.endpoint;
        let seq = self.next_seq();
        let gather_tag = self.tag(seq, PHASE_GATHER);
        let result_tag = self.tag(seq, PHASE_RESULT);
        let root = self.members[0];
        if self.position != 0 {
            let mut msg = Vec::with_capacity(8 + payload.len());
            msg.extend_from_slice(&check.0.to_le_bytes());
            msg.extend_from_slice(&payload);
            ep.send_control(root, ControlKind::Collective, gather_tag, msg)?;
            let result = ep.receive_control(root, result_tag)?;
            return decode_table(&result, n);
        }
        let mut parts = Vec::with_capacity(n);
        parts.push(payload);
        let mut consistent = true;
        for &member in &self.members[1..] {
            let msg = ep.receive_control(member, gather_tag)?;
            if msg.len() < 8 {
                return Err(Error::Transport("short collective message".into()));
            }
            consistent &= u64::from_le_bytes(msg[..8].try_into().unwrap()) == check.0;
            parts.push(msg[8..].to_vec());
        }
        let table = encode_table(consistent, &parts);
        for &member in &self.members[1..] {
            ep.send_control(member, ControlKind::Collective, result_tag, table.clone())?;
        }
        decode_table(&table, n)
    }

    pub(crate) fn allgather_values<T: Pod>(&self, value: T, check: Check) -> Result<Vec<T>> {
        let parts = self.allgather(bytemuck::bytes_of(&value).to_vec(), check)?;
        parts
            .iter()
            .map(|p| {
                if p.len() != std::mem::size_of::<T>() {
                    Err(Error::usage(format!(
                        "collective value width mismatch: {} vs {} bytes",
                        p.len(),
                        std::mem::size_of::<T>()
                    )))
                } else {
                    Ok(bytemuck::pod_read_unaligned(p))
                }
            })
            .collect()
    }

    /// Reserves `count` consecutive team ids agreed on by all members.
    fn allocate_team_ids(&self, count: u64, check: Check) -> Result<u64> {
        let mine = self.rt.next_team_id.load(Ordering::Relaxed);
        let all = self.allgather_values(mine, check)?;
        let base = all.into_iter().max().unwrap();
        self.rt.next_team_id.store(base + count, Ordering::Relaxed);
        Ok(base)
    }

    /// Reserves a segment id agreed on by all members.
    pub(crate) fn allocate_segment_id(&self, check: Check) -> Result<u16> {
        let mine = self.rt.next_segment_id.load(Ordering::Relaxed);
        let all = self.allgather_values(mine, check)?;
        let id = all.into_iter().max().unwrap();
        if id > u16::MAX as u32 {
            return Err(Error::Allocation("segment id space exhausted".into()));
        }
        self.rt.next_segment_id.store(id + 1, Ordering::Relaxed);
        Ok(id as u16)
    }
}

fn encode_table(consistent: bool, parts: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + parts.iter().map(|p| p.len() + 4).sum::<usize>());
    out.push(u8::from(consistent));
    for p in parts {
        out.extend_from_slice(&(p.len() as u32).to_le_bytes());
        out.extend_from_slice(p);
    }
    out
}

fn decode_table(bytes: &[u8], n: usize) -> Result<Vec<Vec<u8>>> {
    let corrupt = || Error::Transport("corrupt collective result".into());
    let (&status, mut rest) = bytes.split_first().ok_or_else(corrupt)?;
    if status == 0 {
        return Err(Error::usage("mismatched collective arguments across team members"));
    }
    let mut parts = Vec::with_capacity(n);
    for _ in 0..n {
        if rest.len() < 4 {
            return Err(corrupt());
        }
        let len = u32::from_le_bytes(rest[..4].try_into().unwrap()) as usize;
        rest = &rest[4..];
        if rest.len() < len {
            return Err(corrupt());
        }
        parts.push(rest[..len].to_vec());
        rest = &rest[len..];
    }
    Ok(parts)
}
