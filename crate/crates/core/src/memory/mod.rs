//! Global pointers, references, iterators and typed global memory.

mod iter;
mod plan;

use std::fmt;
use std::hash::{Hash, Hasher};
use std::marker::PhantomData;
use std::mem::size_of;
use std::sync::atomic::Ordering;
use std::sync::Arc;

use bytemuck::Pod;

use crate::error::{Error, Result};
use crate::runtime::{Check, Runtime, Team, TeamInner, UnitId};
use crate::transport::{Segment, SegmentId};

pub use iter::{GlobalIter, GlobalRange, RangeIter};
pub(crate) use plan::{Run, Transfer};

/// Address of one element anywhere in global memory.
///
/// Serialized as 16 little-endian bytes: unit (32 bits), segment (16), flags
/// (16, reserved), byte offset (64). Arithmetic moves the offset only; it
/// never wraps to another unit.
pub struct GlobalPointer<T> {
    unit: u32,
    segment: u16,
    flags: u16,
    offset: u64,
    _elem: PhantomData<fn() -> T>,
}

impl<T> Clone for GlobalPointer<T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for GlobalPointer<T> {}

impl<T> PartialEq for GlobalPointer<T> {
    fn eq(&self, other: &Self) -> bool {
        self.to_bytes() == other.to_bytes()
    }
}

impl<T> Eq for GlobalPointer<T> {}

impl<T> Hash for GlobalPointer<T> {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.to_bytes().hash(state)
    }
}

impl<T> fmt::Debug for GlobalPointer<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "gptr(unit {}, seg {}, off {:#x})", self.unit, self.segment, self.offset)
    }
}

impl<T> GlobalPointer<T> {
    pub const ENCODED_LEN: usize = 16;

    /// Pointer to byte `offset` of `segment` on `unit`.
    pub fn new(unit: UnitId, segment: SegmentId, offset: u64) -> Self {
        GlobalPointer {
            unit: unit.0,
            segment: segment.0,
            flags: 0,
            offset,
            _elem: PhantomData,
        }
    }

    pub fn unit(&self) -> UnitId {
        UnitId(self.unit)
    }

    pub fn segment(&self) -> SegmentId {
        SegmentId(self.segment)
    }

    pub fn flags(&self) -> u16 {
        self.flags
    }

    pub fn with_flags(self, flags: u16) -> Self {
        GlobalPointer { flags, ..self }
    }

    /// Byte offset inside the segment.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    /// Moves the pointer by `k` elements. Range checks happen on access.
    pub fn add(self, k: i64) -> Self {
        let delta = k.wrapping_mul(size_of::<T>() as i64);
        GlobalPointer {
            offset: self.offset.wrapping_add(delta as u64),
            ..self
        }
    }

    pub fn cast<U>(self) -> GlobalPointer<U> {
        GlobalPointer {
            unit: self.unit,
            segment: self.segment,
            flags: self.flags,
            offset: self.offset,
            _elem: PhantomData,
        }
    }

    pub fn to_bytes(&self) -> [u8; 16] {
        let mut out = [0u8; 16];
        out[0..4].copy_from_slice(&self.unit.to_le_bytes());
        out[4..6].copy_from_slice(&self.segment.to_le_bytes());
        out[6..8].copy_from_slice(&self.flags.to_le_bytes());
        out[8..16].copy_from_slice(&self.offset.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        GlobalPointer {
            unit: u32::from_le_bytes(bytes[0..4].try_into().unwrap()),
            segment: u16::from_le_bytes(bytes[4..6].try_into().unwrap()),
            flags: u16::from_le_bytes(bytes[6..8].try_into().unwrap()),
            offset: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
            _elem: PhantomData,
        }
    }
}

/// Proxy for one global element. Every load is a fresh read; nothing is cached.
pub struct GlobalRef<T> {
    rt: Arc<Runtime>,
    ptr: GlobalPointer<T>,
}

impl<T> fmt::Debug for GlobalRef<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("GlobalRef").field(&self.ptr).finish()
    }
}

impl<T: Pod> GlobalRef<T> {
    pub(crate) fn new(rt: Arc<Runtime>, ptr: GlobalPointer<T>) -> Self {
        GlobalRef { rt, ptr }
    }

    pub fn pointer(&self) -> GlobalPointer<T> {
        self.ptr
    }

    pub fn load(&self) -> Result<T> {
        self.rt.check_active()?;
        let mut value = T::zeroed();
        self.rt.endpoint.get(
            self.ptr.unit(),
            self.ptr.segment(),
            self.ptr.offset(),
            bytemuck::bytes_of_mut(&mut value),
        )?;
        Ok(value)
    }

    /// Writes `value`. Remote stores become visible to others after a flush
    /// or barrier.
    pub fn store(&self, value: T) -> Result<()> {
        self.rt.check_active()?;
        self.rt.endpoint.put(
            self.ptr.unit(),
            self.ptr.segment(),
            self.ptr.offset(),
            bytemuck::bytes_of(&value),
        )
    }
}

pub(crate) fn local_address<T: Pod>(rt: &Runtime, ptr: GlobalPointer<T>) -> Option<*mut T> {
    if ptr.unit() != rt.unit() {
        return None;
    }
    let seg = rt.endpoint.local_segment(ptr.segment())?;
    let end = ptr.offset().checked_add(size_of::<T>() as u64)?;
    if end > seg.len() as u64 || !ptr.offset().is_multiple_of(size_of::<T>().max(1) as u64) {
        return None;
    }
    // SAFETY: the offset lies inside the segment, which outlives this call.
    Some(unsafe { seg.base_ptr().add(ptr.offset() as usize) } as *mut T)
}

/// One collectively allocated segment holding `counts[r]` elements of `T` on
/// team rank `r`. Element `i` of a unit lives at byte offset `i·size_of::<T>()`.
pub struct GlobalMemory<T> {
    team: Arc<TeamInner>,
    segment: SegmentId,
    local: Arc<Segment>,
    counts: Vec<usize>,
    _elem: PhantomData<T>,
}

impl<T> fmt::Debug for GlobalMemory<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GlobalMemory")
            .field("segment", &self.segment)
            .field("counts", &self.counts)
            .finish()
    }
}

impl<T: Pod> GlobalMemory<T> {
    /// Collective over `team`: every member contributes its own element count.
    /// Memory is zeroed.
    pub fn allocate(team: &Team, local_count: usize) -> Result<Self> {
        let check = Check::of("alloc", &(size_of::<T>() as u64).to_le_bytes());
        GlobalMemory::allocate_in(team.shared(), local_count, check)
    }

    /// `check` fingerprints the caller's arguments; members that disagree
    /// get a usage error.
    pub(crate) fn allocate_in(team: Arc<TeamInner>, local_count: usize, check: Check) -> Result<Self> {
        let id = SegmentId(team.allocate_segment_id(check)?);
        let counts: Vec<usize> = team
            .allgather_values(local_count as u64, check)?
            .into_iter()
            .map(|c| c as usize)
            .collect();
        let rt = &team.rt;
        let mut lengths = vec![None; rt.endpoint.n_units()];
        for (rank, &count) in counts.iter().enumerate() {
            let bytes = count
                .checked_mul(size_of::<T>())
                .ok_or_else(|| Error::Allocation(format!("{count} elements overflow the address space")))?;
            lengths[team.members[rank].index()] = Some(bytes as u64);
        }
        let local = rt.endpoint.attach(id, lengths);
        // Nobody may access the segment before every member has registered it.
        if let Err(e) = team.barrier(check) {
            rt.endpoint.detach(id);
            return Err(e);
        }
        Ok(GlobalMemory {
            team,
            segment: id,
            local,
            counts,
            _elem: PhantomData,
        })
    }

    pub fn segment(&self) -> SegmentId {
        self.segment
    }

    /// Element counts per team rank.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn local_count(&self) -> usize {
        self.counts[self.team.position]
    }

    /// Global unit id of team rank `rank`.
    pub fn unit_of_rank(&self, rank: UnitId) -> UnitId {
        self.team.members[rank.index()]
    }

    /// Pointer to element `index` on team rank `rank`.
    pub fn pointer(&self, rank: UnitId, index: usize) -> GlobalPointer<T> {
        GlobalPointer::new(
            self.unit_of_rank(rank),
            self.segment,
            (index * size_of::<T>()) as u64,
        )
    }

    pub fn at(&self, rank: UnitId, index: usize) -> Result<GlobalRef<T>> {
        let count = *self
            .counts
            .get(rank.index())
            .ok_or_else(|| Error::usage(format!("rank {rank} outside the allocating team")))?;
        if index >= count {
            return Err(Error::IndexOutOfBounds { index, len: count });
        }
        Ok(GlobalRef::new(self.team.rt.clone(), self.pointer(rank, index)))
    }

    pub(crate) fn reference(&self, ptr: GlobalPointer<T>) -> GlobalRef<T> {
        GlobalRef::new(self.team.rt.clone(), ptr)
    }

    pub(crate) fn team(&self) -> &Arc<TeamInner> {
        &self.team
    }

    pub(crate) fn runtime(&self) -> &Arc<Runtime> {
        &self.team.rt
    }

    pub(crate) fn local_base(&self) -> *mut T {
        self.local.base_ptr() as *mut T
    }

    /// This unit's elements. Remote puts into the same elements while the
    /// slice is alive are a data race the program has to rule out.
    pub fn local(&self) -> &[T] {
        // SAFETY: the segment is 64-byte aligned, sized for local_count
        // elements and lives as long as self.
        unsafe { std::slice::from_raw_parts(self.local_base(), self.local_count()) }
    }

    pub fn local_mut(&mut self) -> &mut [T] {
        // SAFETY: as in `local`, and &mut self excludes other local views.
        unsafe { std::slice::from_raw_parts_mut(self.local_base(), self.local_count()) }
    }

    /// Local slice through a shared handle, for algorithms that own the
    /// local part for the duration of a collective.
    #[allow(clippy::mut_from_ref)]
    pub(crate) unsafe fn local_unchecked_mut(&self) -> &mut [T] {
        std::slice::from_raw_parts_mut(self.local_base(), self.local_count())
    }
}

impl<T> Drop for GlobalMemory<T> {
    fn drop(&mut self) {
        // Peers may still be reading this segment; wait for everyone before
        // releasing it. A finalized runtime has already released everything.
        let rt = &self.team.rt;
        if rt.check_active().is_ok() && !std::thread::panicking() {
            if let Err(e) = self.team.barrier(Check::of("free", &[])) {
                log::warn!("barrier while freeing segment {}: {e}", self.segment);
            }
        }
        rt.endpoint.detach(self.segment);
    }
}

/// Completion handle of an asynchronous transfer. Dropping it waits.
pub struct AsyncHandle<'a> {
    rt: Arc<Runtime>,
    completion: Option<Box<dyn FnOnce() -> Result<()> + 'a>>,
}

impl fmt::Debug for AsyncHandle<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AsyncHandle")
            .field("complete", &self.completion.is_none())
            .finish()
    }
}

impl<'a> AsyncHandle<'a> {
    pub(crate) fn pending(rt: Arc<Runtime>, completion: impl FnOnce() -> Result<()> + 'a) -> Self {
        rt.pending_async.fetch_add(1, Ordering::AcqRel);
        AsyncHandle {
            rt,
            completion: Some(Box::new(completion)),
        }
    }

    pub(crate) fn complete(rt: Arc<Runtime>) -> Self {
        AsyncHandle { rt, completion: None }
    }

    pub fn is_complete(&self) -> bool {
        self.completion.is_none()
    }

    /// Blocks until the transfer is locally complete. Calling it again is a no-op.
    pub fn wait(&mut self) -> Result<()> {
        match self.completion.take() {
            Some(f) => {
                let result = f();
                self.rt.pending_async.fetch_sub(1, Ordering::AcqRel);
                result
            }
            None => Ok(()),
        }
    }
}

impl Drop for AsyncHandle<'_> {
    fn drop(&mut self) {
        if let Err(e) = self.wait() {
            log::warn!("async transfer failed while dropping its handle: {e}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointer_layout() {
        let p = GlobalPointer::<u32>::new(UnitId(1), SegmentId(3), 0);
        let q = p.add(5);
        assert_eq!(q.offset(), 20);
        assert_eq!(q.unit(), UnitId(1));
        assert_eq!(q.segment(), SegmentId(3));
        assert_eq!(p.add(0), p);
        assert_eq!(q.add(-5), p);
        assert_eq!(
            GlobalPointer::<u8>::new(UnitId(0x0403_0201), SegmentId(0x0605), 0x0e0d_0c0b_0a09).to_bytes(),
            [1, 2, 3, 4, 5, 6, 0, 0, 9, 10, 11, 12, 13, 14, 0, 0]
        );
    }

    #[test]
    fn pointer_is_sixteen_bytes() {
        assert_eq!(GlobalPointer::<u64>::ENCODED_LEN, 16);
        assert_eq!(size_of::<GlobalPointer<[u8; 100]>>(), 16);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn encode_decode_bijection(unit: u32, seg: u16, off: u64) {
                let p = GlobalPointer::<u16>::new(UnitId(unit), SegmentId(seg), off);
                let back = GlobalPointer::<u16>::from_bytes(p.to_bytes());
                prop_assert_eq!(back, p);
                prop_assert_eq!(back.to_bytes(), p.to_bytes());
            }

            #[test]
            fn arithmetic_keeps_unit_and_segment(unit: u32, seg: u16, base in 0u64..1 << 40, a in -1000i64..1000, b in -1000i64..1000) {
                let p = GlobalPointer::<u64>::new(UnitId(unit), SegmentId(seg), base * 8);
                let q = p.add(a).add(b);
                prop_assert_eq!(q, p.add(a + b));
                prop_assert_eq!(q.unit(), p.unit());
                prop_assert_eq!(q.segment(), p.segment());
            }
        }
    }
}
