//! Data distribution patterns.
//!
//! A [`Pattern`] maps every coordinate of an `n₀ × … × n_{d-1}` index space to
//! the unit that stores it and the element's offset in that unit's local
//! memory, and back. Each dimension `k` is distributed independently:
//!
//! * a block size `Bₖ` (`BLOCKED`: `⌈nₖ/tₖ⌉`, `BLOCKCYCLIC(b)`/`TILE(b)`: `b`,
//!   `NONE`: `nₖ`),
//! * the owning unit coordinate `⌊cₖ/Bₖ⌋ mod tₖ`, where `tₖ` is the team
//!   extent in that dimension,
//! * the local coordinate `⌊cₖ/(Bₖtₖ)⌋·Bₖ + cₖ mod Bₖ`.
//!
//! Unit coordinates are linearized row-major over the [`TeamSpec`]. Local
//! coordinates are linearized by [`MemoryOrder`] over the unit's local extents,
//! except in tiled patterns (any dimension `TILE`), where a unit stores its
//! tiles one after another in tile iteration order, each tile linearized by
//! `MemoryOrder` within itself.

mod parse;

use std::fmt;

use crate::error::{Error, Result};
use crate::runtime::UnitId;

pub use parse::PatternSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Distribution {
    Blocked,
    /// Blocks of the given size dealt round-robin. `CYCLIC` is `BlockCyclic(1)`.
    BlockCyclic(usize),
    /// Not distributed in this dimension.
    None,
    Tile(usize),
}

impl Distribution {
    pub const CYCLIC: Distribution = Distribution::BlockCyclic(1);

    pub fn is_tile(self) -> bool {
        matches!(self, Distribution::Tile(_))
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Blocked => write!(f, "BLOCKED"),
            Distribution::BlockCyclic(b) => write!(f, "BLOCKCYCLIC({b})"),
            Distribution::None => write!(f, "NONE"),
            Distribution::Tile(b) => write!(f, "TILE({b})"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum MemoryOrder {
    #[default]
    RowMajor,
    ColMajor,
}

/// Arrangement of a team as a grid, one extent per dimension.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TeamSpec {
    extents: Vec<usize>,
}

impl TeamSpec {
    pub fn new(extents: impl Into<Vec<usize>>) -> TeamSpec {
        TeamSpec {
            extents: extents.into(),
        }
    }

    /// All units along the first distributed dimension, 1 elsewhere.
    pub fn default_for(dists: &[Distribution], n_units: usize) -> TeamSpec {
        let mut extents = vec![1; dists.len()];
        if let Some(k) = dists.iter().position(|d| *d != Distribution::None) {
            extents[k] = n_units;
        } else if let Some(first) = extents.first_mut() {
            // Nothing distributed: only valid for a single unit, which the
            // pattern constructor checks.
            *first = n_units;
        }
        TeamSpec { extents }
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn size(&self) -> usize {
        self.extents.iter().product()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pattern {
    extents: Vec<usize>,
    dists: Vec<Distribution>,
    team: Vec<usize>,
    order: MemoryOrder,
    blocks: Vec<usize>,
    tiled: bool,
    total: usize,
}

impl Pattern {
    pub fn new(
        extents: impl Into<Vec<usize>>,
        dists: impl Into<Vec<Distribution>>,
        teamspec: TeamSpec,
        order: MemoryOrder,
    ) -> Result<Pattern> {
        let extents = extents.into();
        let dists = dists.into();
        let team = teamspec.extents;
        let d = extents.len();
        if d == 0 {
            return Err(Error::Pattern("a pattern needs at least one dimension".into()));
        }
        if dists.len() != d {
            return Err(Error::Pattern(format!(
                "{d} extents but {} distribution specifiers",
                dists.len()
            )));
        }
        if team.len() != d {
            return Err(Error::Pattern(format!(
                "{d}-dimensional pattern with a {}-dimensional team arrangement",
                team.len()
            )));
        }
        if team.contains(&0) {
            return Err(Error::Pattern("team extents must be positive".into()));
        }
        let mut blocks = Vec::with_capacity(d);
        for k in 0..d {
            let b = match dists[k] {
                Distribution::Blocked => extents[k].div_ceil(team[k]),
                Distribution::BlockCyclic(b) | Distribution::Tile(b) => {
                    if b == 0 {
                        return Err(Error::Pattern(format!("block size 0 in dimension {k}")));
                    }
                    b
                }
                Distribution::None => {
                    if team[k] != 1 {
                        return Err(Error::Pattern(format!(
                            "dimension {k} is NONE but the team spans {} units in it",
                            team[k]
                        )));
                    }
                    extents[k]
                }
            };
            // Empty dimensions still need a non-zero divisor.
            blocks.push(b.max(1));
        }
        let tiled = dists.iter().any(|d| d.is_tile());
        Ok(Pattern {
            total: extents.iter().product(),
            extents,
            dists,
            team,
            order,
            blocks,
            tiled,
        })
    }

    /// `new` with the default team arrangement for `n_units`.
    pub fn with_units(
        extents: impl Into<Vec<usize>>,
        dists: impl Into<Vec<Distribution>>,
        n_units: usize,
        order: MemoryOrder,
    ) -> Result<Pattern> {
        let dists = dists.into();
        let teamspec = TeamSpec::default_for(&dists, n_units);
        Pattern::new(extents, dists, teamspec, order)
    }

    /// One-dimensional pattern of `n` elements over `n_units` units.
    pub fn one_d(n: usize, dist: Distribution, n_units: usize) -> Result<Pattern> {
        Pattern::new(vec![n], vec![dist], TeamSpec::new(vec![n_units]), MemoryOrder::RowMajor)
    }

    /// Parses `<extent>("x"<extent>)* <dist>(","<dist>)* ["team" <t>("x"<t>)*] ["row"|"col"]`.
    /// Without a team clause the pattern is laid out for a single unit.
    pub fn parse(text: &str) -> Result<Pattern> {
        PatternSpec::parse(text)?.build(None)
    }

    pub fn ndim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn distributions(&self) -> &[Distribution] {
        &self.dists
    }

    pub fn teamspec(&self) -> TeamSpec {
        TeamSpec::new(self.team.clone())
    }

    pub fn order(&self) -> MemoryOrder {
        self.order
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.blocks
    }

    pub fn is_tiled(&self) -> bool {
        self.tiled
    }

    /// Total number of elements.
    pub fn size(&self) -> usize {
        self.total
    }

    pub fn n_units(&self) -> usize {
        self.team.iter().product()
    }

    fn check_coord(&self, coord: &[usize]) -> Result<()> {
        if coord.len() != self.ndim() {
            return Err(Error::Pattern(format!(
                "{}-dimensional coordinate for a {}-dimensional pattern",
                coord.len(),
                self.ndim()
            )));
        }
        for (k, (&c, &n)) in coord.iter().zip(&self.extents).enumerate() {
            if c >= n {
                return Err(Error::IndexOutOfBounds { index: c, len: n }).map_err(|e| {
                    Error::Pattern(format!("coordinate {coord:?} out of range in dimension {k}: {e}"))
                });
            }
        }
        Ok(())
    }

    fn check_unit(&self, unit: UnitId) -> Result<()> {
        if unit.index() >= self.n_units() {
            return Err(Error::Pattern(format!(
                "unit {unit} outside a team of {}",
                self.n_units()
            )));
        }
        Ok(())
    }

    // Per-dimension mappings.

    #[inline]
    fn unit_coord(&self, k: usize, c: usize) -> usize {
        (c / self.blocks[k]) % self.team[k]
    }

    #[inline]
    fn local_coord(&self, k: usize, c: usize) -> usize {
        let b = self.blocks[k];
        (c / (b * self.team[k])) * b + c % b
    }

    #[inline]
    fn global_coord(&self, k: usize, u: usize, l: usize) -> usize {
        let b = self.blocks[k];
        (l / b) * (b * self.team[k]) + u * b + l % b
    }

    /// Number of indices below `x` in dimension `k` owned by unit coordinate `u`.
    #[inline]
    fn owned_below(&self, k: usize, u: usize, x: usize) -> usize {
        let b = self.blocks[k];
        let cycle = b * self.team[k];
        let rem = (x % cycle) as isize - (u * b) as isize;
        (x / cycle) * b + rem.clamp(0, b as isize) as usize
    }

    fn unit_coords(&self, unit: UnitId) -> Vec<usize> {
        let mut rest = unit.index();
        let mut coords = vec![0; self.ndim()];
        for k in (0..self.ndim()).rev() {
            coords[k] = rest % self.team[k];
            rest /= self.team[k];
        }
        coords
    }

    fn unit_from_coords(&self, coords: impl Iterator<Item = usize>) -> UnitId {
        let mut unit = 0;
        for (k, u) in coords.enumerate() {
            unit = unit * self.team[k] + u;
        }
        UnitId(unit as u32)
    }

    /// Dimension indices from slowest to fastest varying.
    fn slow_to_fast(&self) -> impl DoubleEndedIterator<Item = usize> + Clone {
        let d = self.ndim();
        let row = self.order == MemoryOrder::RowMajor;
        (0..d).map(move |i| if row { i } else { d - 1 - i })
    }

    fn linearize(&self, coords: &[usize], extents: &[usize]) -> usize {
        self.slow_to_fast().fold(0, |acc, k| acc * extents[k] + coords[k])
    }

    fn delinearize(&self, mut offset: usize, extents: &[usize]) -> Vec<usize> {
        let mut coords = vec![0; self.ndim()];
        for k in self.slow_to_fast().rev() {
            coords[k] = offset % extents[k];
            offset /= extents[k];
        }
        coords
    }

    /// Extent of unit-coordinate `u`'s local slab in dimension `k`.
    fn local_extent_dim(&self, k: usize, u: usize) -> usize {
        self.owned_below(k, u, self.extents[k])
    }

    /// Owner of a global coordinate.
    pub fn unit_of(&self, coord: &[usize]) -> Result<UnitId> {
        self.check_coord(coord)?;
        Ok(self.unit_from_coords((0..self.ndim()).map(|k| self.unit_coord(k, coord[k]))))
    }

    /// Owner and local offset of a global coordinate.
    pub fn local_index_of(&self, coord: &[usize]) -> Result<(UnitId, usize)> {
        self.check_coord(coord)?;
        Ok(self.map_unchecked(coord))
    }

    fn map_unchecked(&self, coord: &[usize]) -> (UnitId, usize) {
        let d = self.ndim();
        let unit = self.unit_from_coords((0..d).map(|k| self.unit_coord(k, coord[k])));
        let ucoords: Vec<usize> = (0..d).map(|k| self.unit_coord(k, coord[k])).collect();
        let local: Vec<usize> = (0..d).map(|k| self.local_coord(k, coord[k])).collect();
        let extents: Vec<usize> = (0..d).map(|k| self.local_extent_dim(k, ucoords[k])).collect();
        let offset = if self.tiled {
            self.tiled_offset(&local, &extents)
        } else {
            self.linearize(&local, &extents)
        };
        (unit, offset)
    }

    /// Width of local tile `j` in dimension `k` for a local extent `len`.
    #[inline]
    fn tile_width(&self, k: usize, j: usize, len: usize) -> usize {
        self.blocks[k].min(len - j * self.blocks[k])
    }

    fn tiled_offset(&self, local: &[usize], extents: &[usize]) -> usize {
        let d = self.ndim();
        let tiles: Vec<usize> = (0..d).map(|k| local[k] / self.blocks[k]).collect();
        let widths: Vec<usize> = (0..d).map(|k| self.tile_width(k, tiles[k], extents[k])).collect();
        let order: Vec<usize> = self.slow_to_fast().collect();
        let mut offset = 0;
        for (p, &k) in order.iter().enumerate() {
            let slower: usize = order[..p].iter().map(|&m| widths[m]).product();
            let faster: usize = order[p + 1..].iter().map(|&m| extents[m]).product();
            offset += tiles[k] * self.blocks[k] * slower * faster;
        }
        let inner: Vec<usize> = (0..d).map(|k| local[k] % self.blocks[k]).collect();
        offset + self.linearize(&inner, &widths)
    }

    fn tiled_local(&self, mut offset: usize, extents: &[usize]) -> Vec<usize> {
        let d = self.ndim();
        let order: Vec<usize> = self.slow_to_fast().collect();
        let mut tiles = vec![0; d];
        let mut widths = vec![0; d];
        for (p, &k) in order.iter().enumerate() {
            let slower: usize = order[..p].iter().map(|&m| widths[m]).product();
            let faster: usize = order[p + 1..].iter().map(|&m| extents[m]).product();
            let stride = self.blocks[k] * slower * faster;
            tiles[k] = offset / stride;
            offset -= tiles[k] * stride;
            widths[k] = self.tile_width(k, tiles[k], extents[k]);
        }
        let inner = self.delinearize(offset, &widths);
        (0..d).map(|k| tiles[k] * self.blocks[k] + inner[k]).collect()
    }

    /// Inverse of [`Pattern::local_index_of`].
    pub fn global_coord_of(&self, unit: UnitId, offset: usize) -> Result<Vec<usize>> {
        self.check_unit(unit)?;
        let size = self.local_size(unit)?;
        if offset >= size {
            return Err(Error::IndexOutOfBounds { index: offset, len: size });
        }
        let ucoords = self.unit_coords(unit);
        let extents: Vec<usize> = (0..self.ndim())
            .map(|k| self.local_extent_dim(k, ucoords[k]))
            .collect();
        let local = if self.tiled {
            self.tiled_local(offset, &extents)
        } else {
            self.delinearize(offset, &extents)
        };
        Ok((0..self.ndim())
            .map(|k| self.global_coord(k, ucoords[k], local[k]))
            .collect())
    }

    /// Per-dimension local extents of `unit`.
    pub fn local_extents(&self, unit: UnitId) -> Result<Vec<usize>> {
        self.check_unit(unit)?;
        let ucoords = self.unit_coords(unit);
        Ok((0..self.ndim())
            .map(|k| self.local_extent_dim(k, ucoords[k]))
            .collect())
    }

    pub fn local_size(&self, unit: UnitId) -> Result<usize> {
        Ok(self.local_extents(unit)?.iter().product())
    }

    /// Local sizes of all units, in unit order.
    pub fn local_sizes(&self) -> Vec<usize> {
        (0..self.n_units())
            .map(|u| self.local_size(UnitId(u as u32)).expect("unit in range"))
            .collect()
    }

    // Global linear indices. Elements are numbered by `MemoryOrder` over the
    // global extents; in one dimension the index is the coordinate.

    pub fn coord_of_index(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.total {
            return Err(Error::IndexOutOfBounds { index, len: self.total });
        }
        Ok(self.delinearize(index, &self.extents))
    }

    pub fn index_of_coord(&self, coord: &[usize]) -> Result<usize> {
        self.check_coord(coord)?;
        Ok(self.linearize(coord, &self.extents))
    }

    /// Owner and local offset of global linear index `index`.
    pub fn local_of_index(&self, index: usize) -> Result<(UnitId, usize)> {
        if index >= self.total {
            return Err(Error::IndexOutOfBounds { index, len: self.total });
        }
        Ok(self.map_index_unchecked(index))
    }

    /// Same as [`Pattern::local_of_index`] without the bounds check; callers
    /// guarantee `index < size()`.
    #[inline]
    pub(crate) fn map_index_unchecked(&self, index: usize) -> (UnitId, usize) {
        if self.ndim() == 1 {
            let b = self.blocks[0];
            let u = (index / b) % self.team[0];
            return (UnitId(u as u32), self.local_coord(0, index));
        }
        self.map_unchecked(&self.delinearize(index, &self.extents))
    }

    pub fn index_of_local(&self, unit: UnitId, offset: usize) -> Result<usize> {
        if self.ndim() == 1 {
            self.check_unit(unit)?;
            let size = self.local_extent_dim(0, unit.index());
            if offset >= size {
                return Err(Error::IndexOutOfBounds { index: offset, len: size });
            }
            return Ok(self.global_coord(0, unit.index(), offset));
        }
        let coord = self.global_coord_of(unit, offset)?;
        Ok(self.linearize(&coord, &self.extents))
    }

    /// One-dimensional patterns only: global index of local offset `offset`
    /// of `unit`, unchecked.
    #[inline]
    pub(crate) fn index_of_local_1d(&self, unit: UnitId, offset: usize) -> usize {
        self.global_coord(0, unit.index(), offset)
    }

    /// Local offsets of `unit` whose global index lies in `range`, paired with
    /// that index, in increasing index order.
    pub fn local_in_range(&self, unit: UnitId, range: std::ops::Range<usize>) -> Result<Vec<(usize, usize)>> {
        self.check_unit(unit)?;
        let end = range.end.min(self.total);
        let start = range.start.min(end);
        if self.ndim() == 1 {
            let (lo, hi) = self.local_span_1d(unit, start..end);
            return Ok((lo..hi)
                .map(|l| (l, self.global_coord(0, unit.index(), l)))
                .collect());
        }
        let size = self.local_size(unit)?;
        let mut out: Vec<(usize, usize)> = (0..size)
            .map(|l| (l, self.index_of_local(unit, l).expect("offset in range")))
            .filter(|&(_, g)| g >= start && g < end)
            .collect();
        out.sort_by_key(|&(_, g)| g);
        Ok(out)
    }

    /// One-dimensional patterns only: the contiguous local offsets `[lo, hi)`
    /// of `unit` covering the global indices in `range`.
    pub fn local_span_1d(&self, unit: UnitId, range: std::ops::Range<usize>) -> (usize, usize) {
        debug_assert_eq!(self.ndim(), 1);
        let end = range.end.min(self.total);
        let start = range.start.min(end);
        let u = unit.index();
        (self.owned_below(0, u, start), self.owned_below(0, u, end))
    }

    /// Number of distribution blocks per dimension.
    pub fn block_grid(&self) -> Vec<usize> {
        self.extents
            .iter()
            .zip(&self.blocks)
            .map(|(&n, &b)| n.div_ceil(b))
            .collect()
    }

    /// Coordinate box `[lo, hi)` per dimension covered by distribution block `block`.
    pub fn block_bounds(&self, block: &[usize]) -> Result<Vec<std::ops::Range<usize>>> {
        let grid = self.block_grid();
        if block.len() != self.ndim() || block.iter().zip(&grid).any(|(b, g)| b >= g) {
            return Err(Error::Pattern(format!(
                "block {block:?} outside block grid {grid:?}"
            )));
        }
        Ok((0..self.ndim())
            .map(|k| {
                let lo = block[k] * self.blocks[k];
                lo..(lo + self.blocks[k]).min(self.extents[k])
            })
            .collect())
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("x");
        let dists: Vec<String> = self.dists.iter().map(|d| d.to_string()).collect();
        write!(
            f,
            "{} {} team {} {}",
            join(&self.extents),
            dists.join(","),
            join(&self.team),
            match self.order {
                MemoryOrder::RowMajor => "row",
                MemoryOrder::ColMajor => "col",
            }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn u(x: u32) -> UnitId {
        UnitId(x)
    }

    /// Brute-force reference: walk the index space in global order, track per
    /// unit the owned coordinates by rank of each dimension independently.
    fn enumerate_1d(n: usize, b: usize, t: usize) -> Vec<(usize, usize)> {
        let mut counts = vec![0; t];
        (0..n)
            .map(|i| {
                let unit = (i / b) % t;
                let local = counts[unit];
                counts[unit] += 1;
                (unit, local)
            })
            .collect()
    }

    #[test]
    fn figure_3_owners() {
        let blocked = Pattern::one_d(20, Distribution::Blocked, 4).unwrap();
        assert_eq!(blocked.unit_of(&[12]).unwrap(), u(2));
        let bc3 = Pattern::one_d(20, Distribution::BlockCyclic(3), 4).unwrap();
        assert_eq!(bc3.unit_of(&[7]).unwrap(), u(2));
    }

    #[test]
    fn figure_4_underfilled() {
        let p = Pattern::one_d(14, Distribution::Blocked, 4).unwrap();
        assert_eq!(p.local_index_of(&[13]).unwrap(), (u(3), 1));
        assert_eq!(p.local_sizes(), vec![4, 4, 4, 2]);
        assert_eq!(p.global_coord_of(u(1), 2).unwrap(), vec![6]);
    }

    #[test]
    fn blockcyclic_local_offsets_match_enumeration() {
        let p = Pattern::one_d(20, Distribution::BlockCyclic(3), 4).unwrap();
        // floor(14/3) = 4 ≡ 0 mod 4, local = floor(14/12)*3 + 14 mod 3 = 5
        assert_eq!(p.local_index_of(&[14]).unwrap(), (u(0), 5));
        let oracle = enumerate_1d(20, 3, 4);
        assert_eq!(oracle[14], (0, 5));
        let p10 = Pattern::one_d(10, Distribution::BlockCyclic(3), 4).unwrap();
        let mut sizes = vec![0; 4];
        for (unit, _) in enumerate_1d(10, 3, 4) {
            sizes[unit] += 1;
        }
        assert_eq!(sizes, vec![3, 3, 3, 1]);
        assert_eq!(p10.local_sizes(), sizes);
    }

    #[test]
    fn figure_3_balance() {
        for dist in [Distribution::Blocked, Distribution::CYCLIC] {
            assert_eq!(Pattern::one_d(20, dist, 4).unwrap().local_sizes(), vec![5, 5, 5, 5]);
        }
        // Blocks of three over four units leave the cycle unbalanced.
        assert_eq!(
            Pattern::one_d(20, Distribution::BlockCyclic(3), 4).unwrap().local_sizes(),
            vec![6, 6, 5, 3]
        );
    }

    #[test]
    fn figure_5_left_and_middle() {
        let left = Pattern::new(
            vec![16, 10],
            vec![Distribution::Blocked, Distribution::None],
            TeamSpec::new(vec![4, 1]),
            MemoryOrder::RowMajor,
        )
        .unwrap();
        assert_eq!(left.unit_of(&[5, 3]).unwrap(), u(1));
        let middle = Pattern::new(
            vec![16, 10],
            vec![Distribution::None, Distribution::Blocked],
            TeamSpec::new(vec![1, 4]),
            MemoryOrder::RowMajor,
        )
        .unwrap();
        assert_eq!(middle.block_sizes(), &[16, 3]);
        assert_eq!(middle.unit_of(&[0, 9]).unwrap(), u(3));
        assert_eq!(middle.local_extents(u(3)).unwrap(), vec![16, 1]);
    }

    #[test]
    fn figure_5_right_tiles() {
        let p = Pattern::new(
            vec![16, 10],
            vec![Distribution::Tile(4), Distribution::Tile(2)],
            TeamSpec::new(vec![2, 2]),
            MemoryOrder::ColMajor,
        )
        .unwrap();
        // The first 8 local offsets of unit 0 fill the 4x2 tile at the
        // origin, column by column.
        for off in 0..8 {
            let c = p.global_coord_of(u(0), off).unwrap();
            assert_eq!(c, vec![off % 4, off / 4]);
        }
        // Next local tile in column-major tile order is one block-row down
        // for this unit: global tile (2, 0).
        assert_eq!(p.global_coord_of(u(0), 8).unwrap(), vec![8, 0]);
        assert_eq!(p.unit_of(&[4, 0]).unwrap(), u(2));
        assert_eq!(p.unit_of(&[0, 2]).unwrap(), u(1));
    }

    #[test]
    fn cyclic_is_blockcyclic_one() {
        let a = Pattern::one_d(37, Distribution::CYCLIC, 5).unwrap();
        let b = Pattern::one_d(37, Distribution::BlockCyclic(1), 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tile_and_blockcyclic_share_owners_in_1d() {
        for n in 0..40 {
            for b in 1..6 {
                for t in 1..5 {
                    let tile = Pattern::one_d(n, Distribution::Tile(b), t).unwrap();
                    let bc = Pattern::one_d(n, Distribution::BlockCyclic(b), t).unwrap();
                    for i in 0..n {
                        assert_eq!(tile.unit_of(&[i]).unwrap(), bc.unit_of(&[i]).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn blocked_ownership_is_contiguous() {
        for n in 0..50 {
            for t in 1..8 {
                let p = Pattern::one_d(n, Distribution::Blocked, t).unwrap();
                for unit in 0..t {
                    let owned: Vec<usize> = (0..n).filter(|&i| p.unit_of(&[i]).unwrap() == u(unit as u32)).collect();
                    if let (Some(first), Some(last)) = (owned.first(), owned.last()) {
                        assert_eq!(last - first + 1, owned.len());
                    }
                }
            }
        }
    }

    #[test]
    fn storage_order_law() {
        let p = Pattern::new(
            vec![7, 9],
            vec![Distribution::BlockCyclic(2), Distribution::Blocked],
            TeamSpec::new(vec![2, 2]),
            MemoryOrder::RowMajor,
        )
        .unwrap();
        for r in 0..7 {
            for c in 0..8 {
                let (u0, o0) = p.local_index_of(&[r, c]).unwrap();
                let (u1, o1) = p.local_index_of(&[r, c + 1]).unwrap();
                if u0 == u1 && p.local_coord(1, c) + 1 == p.local_coord(1, c + 1) {
                    assert_eq!(o1, o0 + 1);
                }
            }
        }
        let q = Pattern::new(
            vec![6, 5],
            vec![Distribution::Blocked, Distribution::None],
            TeamSpec::new(vec![2, 1]),
            MemoryOrder::ColMajor,
        )
        .unwrap();
        assert_eq!(q.local_index_of(&[1, 0]).unwrap(), (u(0), 1));
        assert_eq!(q.local_index_of(&[0, 1]).unwrap(), (u(0), 3));
    }

    #[test]
    fn bijection_small_2d_tiles_with_remainders() {
        let p = Pattern::new(
            vec![7, 5],
            vec![Distribution::Tile(3), Distribution::Tile(2)],
            TeamSpec::new(vec![2, 2]),
            MemoryOrder::RowMajor,
        )
        .unwrap();
        let mut seen = HashSet::new();
        for r in 0..7 {
            for c in 0..5 {
                let (unit, off) = p.local_index_of(&[r, c]).unwrap();
                assert!(off < p.local_size(unit).unwrap());
                assert!(seen.insert((unit, off)));
                assert_eq!(p.global_coord_of(unit, off).unwrap(), vec![r, c]);
            }
        }
    }

    #[test]
    fn invalid_patterns() {
        assert!(Pattern::one_d(10, Distribution::BlockCyclic(0), 2).is_err());
        assert!(Pattern::new(vec![4, 4], vec![Distribution::None, Distribution::Blocked], TeamSpec::new(vec![2, 1]), MemoryOrder::RowMajor).is_err());
        assert!(Pattern::new(vec![4], vec![Distribution::Blocked, Distribution::None], TeamSpec::new(vec![1]), MemoryOrder::RowMajor).is_err());
        let p = Pattern::one_d(4, Distribution::Blocked, 2).unwrap();
        assert!(p.unit_of(&[4]).is_err());
        assert!(p.global_coord_of(u(1), 2).is_err());
        assert!(p.local_size(u(2)).is_err());
    }

    #[test]
    fn empty_pattern() {
        let p = Pattern::one_d(0, Distribution::Blocked, 3).unwrap();
        assert_eq!(p.local_sizes(), vec![0, 0, 0]);
        assert_eq!(p.local_span_1d(u(1), 0..0), (0, 0));
    }

    #[test]
    fn local_span_matches_filter() {
        let p = Pattern::one_d(29, Distribution::BlockCyclic(3), 4).unwrap();
        for unit in 0..4u32 {
            for a in 0..29 {
                for b in a..=29 {
                    let (lo, hi) = p.local_span_1d(u(unit), a..b);
                    let expected: Vec<usize> = (0..p.local_size(u(unit)).unwrap())
                        .filter(|&l| (a..b).contains(&p.index_of_local(u(unit), l).unwrap()))
                        .collect();
                    assert_eq!((lo..hi).collect::<Vec<_>>(), expected);
                }
            }
        }
    }

    #[test]
    fn default_teamspec() {
        let p = Pattern::with_units(vec![40, 30], vec![Distribution::Blocked, Distribution::None], 4, MemoryOrder::RowMajor).unwrap();
        assert_eq!(p.teamspec().extents(), &[4, 1]);
        assert_eq!(p.local_sizes(), vec![300; 4]);
        let q = Pattern::with_units(vec![16, 10], vec![Distribution::None, Distribution::Blocked], 4, MemoryOrder::RowMajor).unwrap();
        assert_eq!(q.teamspec().extents(), &[1, 4]);
    }
}
