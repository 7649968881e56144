use std::fmt;
use std::mem::size_of;
use std::ops::{Index, IndexMut};

use bytemuck::Pod;

use crate::error::{Error, Result};
use crate::memory::{GlobalIter, GlobalMemory, GlobalRange, GlobalRef};
use crate::pattern::{Distribution, Pattern};
use crate::runtime::{Check, Team, UnitId};

/// Fixed-size one-dimensional array distributed over a team.
pub struct DistributedArray<T> {
    pattern: Pattern,
    mem: GlobalMemory<T>,
}

impl<T> fmt::Debug for DistributedArray<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DistributedArray")
            .field("pattern", &self.pattern.to_string())
            .field("memory", &self.mem)
            .finish()
    }
}

pub(crate) fn pattern_check(kind: &str, pattern: &Pattern, elem_size: usize) -> Check {
    Check::of(kind, format!("{pattern} {elem_size}").as_bytes())
}

impl<T: Pod> DistributedArray<T> {
    /// Collective: `n` elements, `BLOCKED` over `team`. Elements start zeroed.
    pub fn new(team: &Team, n: usize) -> Result<Self> {
        DistributedArray::with_dist(team, n, Distribution::Blocked)
    }

    pub fn with_dist(team: &Team, n: usize, dist: Distribution) -> Result<Self> {
        DistributedArray::with_pattern(team, Pattern::one_d(n, dist, team.size())?)
    }

    pub fn with_pattern(team: &Team, pattern: Pattern) -> Result<Self> {
        if pattern.ndim() != 1 {
            return Err(Error::Pattern(format!(
                "an array needs a one-dimensional pattern, got {} dimensions",
                pattern.ndim()
            )));
        }
        if pattern.n_units() != team.size() {
            return Err(Error::Pattern(format!(
                "pattern laid out for {} units used on a team of {}",
                pattern.n_units(),
                team.size()
            )));
        }
        let local = pattern.local_size(team.my_id())?;
        let check = pattern_check("array", &pattern, size_of::<T>());
        let mem = GlobalMemory::allocate_in(team.shared(), local, check)?;
        Ok(DistributedArray { pattern, mem })
    }

    /// Like `with_dist`, with every element set to `value`.
    pub fn new_filled(team: &Team, n: usize, dist: Distribution, value: T) -> Result<Self> {
        let mut arr = DistributedArray::with_dist(team, n, dist)?;
        arr.local_mut().fill(value);
        team.barrier()?;
        Ok(arr)
    }

    pub fn len(&self) -> usize {
        self.pattern.size()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn memory(&self) -> &GlobalMemory<T> {
        &self.mem
    }

    /// The caller's rank in the owning team.
    pub fn my_rank(&self) -> UnitId {
        UnitId(self.mem.team().position as u32)
    }

    /// Bounds-checked element access.
    pub fn at(&self, index: usize) -> Result<GlobalRef<T>> {
        let (rank, offset) = self.pattern.local_of_index(index)?;
        Ok(self.mem.reference(self.mem.pointer(rank, offset)))
    }

    /// Element access, bounds-checked in debug builds only.
    pub fn index(&self, index: usize) -> GlobalRef<T> {
        debug_assert!(index < self.len(), "index {index} out of bounds for length {}", self.len());
        let (rank, offset) = self.pattern.map_index_unchecked(index);
        self.mem.reference(self.mem.pointer(rank, offset))
    }

    pub fn begin(&self) -> GlobalIter<'_, T> {
        GlobalIter::new(&self.mem, &self.pattern, 0)
    }

    pub fn end(&self) -> GlobalIter<'_, T> {
        GlobalIter::new(&self.mem, &self.pattern, self.len())
    }

    pub fn range(&self) -> GlobalRange<'_, T> {
        GlobalRange::new(self.begin(), self.end()).expect("whole array is a valid range")
    }

    /// Sub-range `[range.start, range.end)` of global indices.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<GlobalRange<'_, T>> {
        GlobalRange::new(self.begin() + range.start as isize, self.begin() + range.end as isize)
    }

    pub fn local(&self) -> &[T] {
        self.mem.local()
    }

    pub fn local_mut(&mut self) -> &mut [T] {
        self.mem.local_mut()
    }

    /// Local view with subscript, iterator and raw pointer access.
    pub fn local_view(&mut self) -> LocalView<'_, T> {
        let rank = self.my_rank();
        LocalView {
            data: self.mem.local_mut(),
            pattern: &self.pattern,
            rank,
        }
    }

    /// Global index of the caller's local element `local`.
    pub fn global_index_of_local(&self, local: usize) -> Result<usize> {
        self.pattern.index_of_local(self.my_rank(), local)
    }

    /// Copies the whole array into a local vector (one-sided, non-collective).
    pub fn to_vec(&self) -> Result<Vec<T>> {
        let mut out = vec![T::zeroed(); self.len()];
        self.range().get(&mut out)?;
        Ok(out)
    }
}

/// The caller's part of a distributed array, in local storage order.
pub struct LocalView<'a, T> {
    data: &'a mut [T],
    pattern: &'a Pattern,
    rank: UnitId,
}

impl<'a, T: Pod> LocalView<'a, T> {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> Result<T> {
        self.data
            .get(i)
            .copied()
            .ok_or(Error::IndexOutOfBounds { index: i, len: self.data.len() })
    }

    pub fn set(&mut self, i: usize, value: T) -> Result<()> {
        let len = self.data.len();
        let slot = self
            .data
            .get_mut(i)
            .ok_or(Error::IndexOutOfBounds { index: i, len })?;
        *slot = value;
        Ok(())
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn iter_mut(&mut self) -> std::slice::IterMut<'_, T> {
        self.data.iter_mut()
    }

    /// First local element.
    pub fn lbegin(&mut self) -> *mut T {
        self.data.as_mut_ptr()
    }

    /// One past the last local element.
    pub fn lend(&mut self) -> *mut T {
        self.data.as_mut_ptr_range().end
    }

    pub fn as_slice(&self) -> &[T] {
        self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        self.data
    }

    /// Global index of local element `i`.
    pub fn global_index(&self, i: usize) -> Result<usize> {
        self.pattern.index_of_local(self.rank, i)
    }
}

impl<T> Index<usize> for LocalView<'_, T> {
    type Output = T;

    #[inline]
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T> IndexMut<usize> for LocalView<'_, T> {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}
