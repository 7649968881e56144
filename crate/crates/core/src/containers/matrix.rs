use std::fmt;
use std::mem::size_of;
use std::ops::Range;

use bytemuck::Pod;

use crate::error::{Error, Result};
use crate::memory::{GlobalIter, GlobalMemory, GlobalRange, GlobalRef, Transfer};
use crate::pattern::{Distribution, MemoryOrder, Pattern, TeamSpec};
use crate::runtime::{Team, UnitId};

use super::array::pattern_check;

/// Fixed-size `D`-dimensional array distributed over a team.
pub struct DistributedMatrix<T, const D: usize> {
    pattern: Pattern,
    mem: GlobalMemory<T>,
}

impl<T, const D: usize> fmt::Debug for DistributedMatrix<T, D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DistributedMatrix")
            .field("pattern", &self.pattern.to_string())
            .finish()
    }
}

impl<T: Pod, const D: usize> DistributedMatrix<T, D> {
    /// Collective: `BLOCKED` in the first dimension, `NONE` elsewhere,
    /// row-major. Elements start zeroed.
    pub fn new(team: &Team, extents: [usize; D]) -> Result<Self> {
        let mut dists = [Distribution::None; D];
        if D > 0 {
            dists[0] = Distribution::Blocked;
        }
        DistributedMatrix::with_dists(team, extents, dists, None, MemoryOrder::RowMajor)
    }

    pub fn with_dists(
        team: &Team,
        extents: [usize; D],
        dists: [Distribution; D],
        teamspec: Option<TeamSpec>,
        order: MemoryOrder,
    ) -> Result<Self> {
        let teamspec = teamspec.unwrap_or_else(|| TeamSpec::default_for(&dists, team.size()));
        DistributedMatrix::with_pattern(team, Pattern::new(extents, dists, teamspec, order)?)
    }

    pub fn with_pattern(team: &Team, pattern: Pattern) -> Result<Self> {
        if pattern.ndim() != D {
            return Err(Error::Pattern(format!(
                "{}-dimensional pattern for a {D}-dimensional matrix",
                pattern.ndim()
            )));
        }
        if pattern.n_units() != team.size() {
            return Err(Error::Pattern(format!(
                "team arrangement of {} units used on a team of {}",
                pattern.n_units(),
                team.size()
            )));
        }
        let local = pattern.local_size(team.my_id())?;
        let check = pattern_check("matrix", &pattern, size_of::<T>());
        let mem = GlobalMemory::allocate_in(team.shared(), local, check)?;
        Ok(DistributedMatrix { pattern, mem })
    }

    pub fn extents(&self) -> [usize; D] {
        self.pattern.extents().try_into().expect("pattern rank matches D")
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

    pub fn my_rank(&self) -> UnitId {
        UnitId(self.mem.team().position as u32)
    }

    pub fn at(&self, coord: [usize; D]) -> Result<GlobalRef<T>> {
        let (rank, offset) = self.pattern.local_index_of(&coord)?;
        Ok(self.mem.reference(self.mem.pointer(rank, offset)))
    }

    /// Iterators over all elements, numbered by the pattern's memory order
    /// over the global extents.
    pub fn begin(&self) -> GlobalIter<'_, T> {
        GlobalIter::new(&self.mem, &self.pattern, 0)
    }

    pub fn end(&self) -> GlobalIter<'_, T> {
        GlobalIter::new(&self.mem, &self.pattern, self.len())
    }

    pub fn range(&self) -> GlobalRange<'_, T> {
        GlobalRange::new(self.begin(), self.end()).expect("whole matrix is a valid range")
    }

    pub fn local(&self) -> &[T] {
        self.mem.local()
    }

    pub fn local_mut(&mut self) -> &mut [T] {
        self.mem.local_mut()
    }

    pub fn local_extents(&self) -> Vec<usize> {
        self.pattern.local_extents(self.my_rank()).expect("rank inside the pattern")
    }

    /// View of the whole matrix.
    pub fn view(&self) -> MatrixView<'_, T, D> {
        MatrixView {
            matrix: self,
            lo: [0; D],
            hi: self.extents(),
        }
    }

    pub fn sub(&self, dim: usize, range: Range<usize>) -> Result<MatrixView<'_, T, D>> {
        self.view().sub(dim, range)
    }

    /// The box covered by distribution block `block`.
    pub fn block(&self, block: [usize; D]) -> Result<MatrixView<'_, T, D>> {
        let bounds = self.pattern.block_bounds(&block)?;
        let mut view = self.view();
        for (k, r) in bounds.into_iter().enumerate() {
            view.lo[k] = r.start;
            view.hi[k] = r.end;
        }
        Ok(view)
    }

    pub fn to_vec(&self) -> Result<Vec<T>> {
        self.view().to_vec()
    }
}

/// Axis-aligned box `[lo, hi)` of a matrix. Views alias the matrix.
pub struct MatrixView<'a, T, const D: usize> {
    matrix: &'a DistributedMatrix<T, D>,
    lo: [usize; D],
    hi: [usize; D],
}

impl<T, const D: usize> Clone for MatrixView<'_, T, D> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T, const D: usize> Copy for MatrixView<'_, T, D> {}

impl<T, const D: usize> fmt::Debug for MatrixView<'_, T, D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixView").field("lo", &self.lo).field("hi", &self.hi).finish()
    }
}

impl<'a, T: Pod, const D: usize> MatrixView<'a, T, D> {
    /// Restricts dimension `dim` to `range`, given in view coordinates.
    pub fn sub(&self, dim: usize, range: Range<usize>) -> Result<Self> {
        if dim >= D {
            return Err(Error::usage(format!("dimension {dim} of a {D}-dimensional view")));
        }
        let extent = self.hi[dim] - self.lo[dim];
        if range.start >= range.end || range.end > extent {
            return Err(Error::usage(format!(
                "invalid range {}..{} in dimension {dim} of extent {extent}",
                range.start, range.end
            )));
        }
        let mut view = *self;
        view.lo[dim] = self.lo[dim] + range.start;
        view.hi[dim] = self.lo[dim] + range.end;
        Ok(view)
    }

    /// Corner of the view in matrix coordinates.
    pub fn offsets(&self) -> [usize; D] {
        self.lo
    }

    pub fn extents(&self) -> [usize; D] {
        std::array::from_fn(|k| self.hi[k] - self.lo[k])
    }

    pub fn len(&self) -> usize {
        self.extents().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Matrix coordinate of view position `pos`, counting in the matrix's
    /// memory order over the view's extents.
    pub fn coord_of(&self, pos: usize) -> Result<[usize; D]> {
        if pos >= self.len() {
            return Err(Error::IndexOutOfBounds { index: pos, len: self.len() });
        }
        let ext = self.extents();
        let mut rest = pos;
        let mut coord = [0; D];
        let dims: Vec<usize> = match self.matrix.pattern.order() {
            MemoryOrder::RowMajor => (0..D).rev().collect(),
            MemoryOrder::ColMajor => (0..D).collect(),
        };
        for k in dims {
            coord[k] = self.lo[k] + rest % ext[k];
            rest /= ext[k];
        }
        Ok(coord)
    }

    /// Element at view coordinate `coord`.
    pub fn at(&self, coord: [usize; D]) -> Result<GlobalRef<T>> {
        let ext = self.extents();
        if let Some(k) = (0..D).find(|&k| coord[k] >= ext[k]) {
            return Err(Error::IndexOutOfBounds { index: coord[k], len: ext[k] });
        }
        self.matrix.at(std::array::from_fn(|k| self.lo[k] + coord[k]))
    }

    /// Matrix coordinates of the view in view order.
    pub fn coords(&self) -> impl Iterator<Item = [usize; D]> + '_ {
        (0..self.len()).map(|p| self.coord_of(p).expect("position in range"))
    }

    /// Global references in view order.
    pub fn iter(&self) -> impl Iterator<Item = GlobalRef<T>> + '_ {
        self.coords().map(|c| self.matrix.at(c).expect("view inside the matrix"))
    }

    /// Team ranks owning at least one element of the view.
    pub fn owners(&self) -> Vec<UnitId> {
        let mut owners: Vec<UnitId> = self
            .coords()
            .map(|c| self.matrix.pattern.unit_of(&c).expect("view inside the matrix"))
            .collect();
        owners.sort_unstable();
        owners.dedup();
        owners
    }

    fn transfer(&self) -> Transfer {
        Transfer::from_elements(self.coords().enumerate().map(|(pos, c)| {
            let (rank, off) = self.matrix.pattern.local_index_of(&c).expect("view inside the matrix");
            (pos, rank, off)
        }))
    }

    /// Copies the view into `dst` in view order (one-sided).
    pub fn get(&self, dst: &mut [T]) -> Result<()> {
        if dst.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: dst.len() });
        }
        self.matrix.mem.runtime().check_active()?;
        self.transfer().fetch(&self.matrix.mem, dst)
    }

    /// Writes `src` (in view order) into the view. Visible to others after
    /// a flush or barrier.
    pub fn put(&self, src: &[T]) -> Result<()> {
        if src.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: src.len() });
        }
        self.matrix.mem.runtime().check_active()?;
        self.transfer().store(&self.matrix.mem, src)
    }

    pub fn to_vec(&self) -> Result<Vec<T>> {
        let mut out = vec![T::zeroed(); self.len()];
        self.get(&mut out)?;
        Ok(out)
    }
}
