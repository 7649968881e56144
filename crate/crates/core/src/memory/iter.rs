//! Global iterators: a global linear index plus the memory and pattern that
//! turn it into an address on demand.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Sub};

use bytemuck::Pod;

use crate::error::{Error, Result};
use crate::pattern::Pattern;
use crate::runtime::UnitId;

use super::{AsyncHandle, GlobalMemory, GlobalPointer, GlobalRef, Run, Transfer};

pub struct GlobalIter<'a, T> {
    mem: &'a GlobalMemory<T>,
    pattern: &'a Pattern,
    index: usize,
}

impl<T> Clone for GlobalIter<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for GlobalIter<'_, T> {}

impl<T> fmt::Debug for GlobalIter<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GlobalIter({})", self.index)
    }
}

impl<'a, T: Pod> GlobalIter<'a, T> {
    pub(crate) fn new(mem: &'a GlobalMemory<T>, pattern: &'a Pattern, index: usize) -> Self {
        GlobalIter { mem, pattern, index }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn pattern(&self) -> &'a Pattern {
        self.pattern
    }

    pub fn is_end(&self) -> bool {
        self.index >= self.pattern.size()
    }

    /// Team rank and local offset of the element.
    pub fn local_position(&self) -> Result<(UnitId, usize)> {
        self.pattern.local_of_index(self.index)
    }

    pub fn pointer(&self) -> Result<GlobalPointer<T>> {
        let (rank, offset) = self.local_position()?;
        Ok(self.mem.pointer(rank, offset))
    }

    pub fn deref(&self) -> Result<GlobalRef<T>> {
        Ok(self.mem.reference(self.pointer()?))
    }

    pub(crate) fn same_container(&self, other: &GlobalIter<'_, T>) -> bool {
        std::ptr::eq(self.mem, other.mem)
    }
}

impl<T> PartialEq for GlobalIter<'_, T> {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.mem, other.mem) && self.index == other.index
    }
}

impl<T> PartialOrd for GlobalIter<'_, T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        std::ptr::eq(self.mem, other.mem).then(|| self.index.cmp(&other.index))
    }
}

impl<T> Add<isize> for GlobalIter<'_, T> {
    type Output = Self;

    fn add(self, k: isize) -> Self {
        GlobalIter {
            index: self.index.wrapping_add_signed(k),
            ..self
        }
    }
}

impl<T> Sub<isize> for GlobalIter<'_, T> {
    type Output = Self;

    fn sub(self, k: isize) -> Self {
        GlobalIter {
            index: self.index.wrapping_add_signed(k.wrapping_neg()),
            ..self
        }
    }
}

impl<T> Sub for GlobalIter<'_, T> {
    type Output = isize;

    fn sub(self, other: Self) -> isize {
        self.index.wrapping_sub(other.index) as isize
    }
}

/// Half-open range `[first, last)` of global iterators over one container.
pub struct GlobalRange<'a, T> {
    first: GlobalIter<'a, T>,
    last: GlobalIter<'a, T>,
}

impl<T> Clone for GlobalRange<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for GlobalRange<'_, T> {}

impl<T> fmt::Debug for GlobalRange<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GlobalRange({}..{})", self.first.index, self.last.index)
    }
}

impl<'a, T: Pod> GlobalRange<'a, T> {
    pub fn new(first: GlobalIter<'a, T>, last: GlobalIter<'a, T>) -> Result<Self> {
        if !first.same_container(&last) {
            return Err(Error::usage("range bounds belong to different containers"));
        }
        if first.index > last.index || last.index > first.pattern.size() {
            return Err(Error::usage(format!(
                "invalid range {}..{} over {} elements",
                first.index,
                last.index,
                first.pattern.size()
            )));
        }
        Ok(GlobalRange { first, last })
    }

    pub fn begin(&self) -> GlobalIter<'a, T> {
        self.first
    }

    pub fn end(&self) -> GlobalIter<'a, T> {
        self.last
    }

    pub fn len(&self) -> usize {
        self.last.index - self.first.index
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.first.index..self.last.index
    }

    pub(crate) fn memory(&self) -> &'a GlobalMemory<T> {
        self.first.mem
    }

    pub fn pattern(&self) -> &'a Pattern {
        self.first.pattern
    }

    /// `(local offset, global index)` of the caller's elements in the range,
    /// in global index order.
    pub fn local_part(&self) -> Vec<(usize, usize)> {
        let pattern = self.pattern();
        let me = UnitId(self.memory().team().position as u32);
        pattern
            .local_in_range(me, self.indices())
            .expect("team rank inside the pattern")
    }

    /// Element transfer plan: buffer slot `i` holds global index `first + i`.
    pub(crate) fn transfer(&self) -> Transfer {
        let pattern = self.pattern();
        let start = self.first.index;
        if pattern.ndim() == 1 {
            let runs = (0..pattern.n_units())
                .filter_map(|r| {
                    let rank = UnitId(r as u32);
                    let (lo, hi) = pattern.local_span_1d(rank, self.indices());
                    (lo < hi).then(|| Run {
                        rank,
                        start: lo,
                        positions: (lo..hi)
                            .map(|l| pattern.index_of_local(rank, l).expect("local offset in range") - start)
                            .collect(),
                    })
                })
                .collect();
            return Transfer::from_runs(runs);
        }
        Transfer::from_elements(self.indices().map(|i| {
            let (rank, off) = pattern.local_of_index(i).expect("index in range");
            (i - start, rank, off)
        }))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: len,
            });
        }
        Ok(())
    }

    /// Copies the range into `dst` in global index order.
    pub fn get(&self, dst: &mut [T]) -> Result<()> {
        self.check_len(dst.len())?;
        self.memory().runtime().check_active()?;
        self.transfer().fetch(self.memory(), dst)
    }

    /// Writes `src` over the range. Locally complete on return; remote
    /// visibility needs a flush or barrier.
    pub fn put(&self, src: &[T]) -> Result<()> {
        self.check_len(src.len())?;
        self.memory().runtime().check_active()?;
        self.transfer().store(self.memory(), src)
    }

    pub fn get_async<'b>(&self, dst: &'b mut [T]) -> Result<AsyncHandle<'b>>
    where
        'a: 'b,
    {
        self.check_len(dst.len())?;
        let rt = self.memory().runtime().clone();
        rt.check_active()?;
        if self.is_empty() {
            return Ok(AsyncHandle::complete(rt));
        }
        let pending = self.transfer().start_gets(self.memory())?;
        Ok(AsyncHandle::pending(rt, move || Transfer::finish_gets(pending, dst)))
    }

    /// Puts are buffered or applied when issued, so the handle only tracks
    /// local completion.
    pub fn put_async(&self, src: &[T]) -> Result<AsyncHandle<'a>> {
        self.put(src)?;
        Ok(AsyncHandle::complete(self.memory().runtime().clone()))
    }
}

impl<'a, T: Pod> IntoIterator for GlobalRange<'a, T> {
    type Item = GlobalIter<'a, T>;
    type IntoIter = RangeIter<'a, T>;

    fn into_iter(self) -> RangeIter<'a, T> {
        RangeIter {
            next: self.first,
            end: self.last.index,
        }
    }
}

/// Walks the iterators of a range in global order.
pub struct RangeIter<'a, T> {
    next: GlobalIter<'a, T>,
    end: usize,
}

impl<'a, T: Pod> Iterator for RangeIter<'a, T> {
    type Item = GlobalIter<'a, T>;

    fn next(&mut self) -> Option<GlobalIter<'a, T>> {
        if self.next.index >= self.end {
            return None;
        }
        let it = self.next;
        self.next = it + 1;
        Some(it)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.end.saturating_sub(self.next.index);
        (n, Some(n))
    }
}

impl<T: Pod> ExactSizeIterator for RangeIter<'_, T> {}
