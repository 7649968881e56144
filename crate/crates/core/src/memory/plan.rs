//! Batched transfers between a local buffer and scattered global elements.
//!
//! Elements are grouped by owner, sorted by local offset and merged into runs
//! of consecutive local offsets, so that each run is a single get or put no
//! matter how the buffer positions interleave.

use std::collections::BTreeMap;
use std::mem::size_of;

use bytemuck::Pod;

use crate::error::Result;
use crate::runtime::UnitId;
use crate::transport::PendingGet;

use super::GlobalMemory;

/// Upper bound on the bytes moved by one get or put.
const MAX_RUN_BYTES: usize = 1 << 20;

/// Local elements `start..start + positions.len()` of team rank `rank`;
/// `positions[i]` is the buffer slot of element `start + i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Run {
    pub rank: UnitId,
    pub start: usize,
    pub positions: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Transfer {
    pub runs: Vec<Run>,
}

impl Transfer {
    /// Builds a transfer from `(buffer position, rank, local offset)` triples.
    pub fn from_elements(elems: impl IntoIterator<Item = (usize, UnitId, usize)>) -> Transfer {
        let mut by_rank: BTreeMap<UnitId, Vec<(usize, usize)>> = BTreeMap::new();
        for (pos, rank, offset) in elems {
            by_rank.entry(rank).or_default().push((offset, pos));
        }
        let mut runs = Vec::new();
        for (rank, mut elems) in by_rank {
            elems.sort_unstable();
            let mut current: Option<Run> = None;
            for (offset, pos) in elems {
                match &mut current {
                    Some(run) if run.start + run.positions.len() == offset => run.positions.push(pos),
                    _ => {
                        runs.extend(current.take());
                        current = Some(Run {
                            rank,
                            start: offset,
                            positions: vec![pos],
                        });
                    }
                }
            }
            runs.extend(current);
        }
        Transfer { runs }
    }

    /// Builds a transfer from runs that are already contiguous per rank.
    pub fn from_runs(runs: Vec<Run>) -> Transfer {
        Transfer { runs }
    }

    /// Splits runs larger than `max_elems` elements.
    fn chunks(&self, max_elems: usize) -> impl Iterator<Item = (UnitId, usize, &[usize])> {
        self.runs.iter().flat_map(move |run| {
            run.positions
                .chunks(max_elems.max(1))
                .enumerate()
                .map(move |(i, c)| (run.rank, run.start + i * max_elems.max(1), c))
        })
    }

    /// Issues every get without waiting.
    pub fn start_gets<T: Pod>(&self, mem: &GlobalMemory<T>) -> Result<Vec<(PendingGet, Vec<usize>)>> {
        let ep = &mem.runtime().endpoint;
        let width = size_of::<T>();
        let max = MAX_RUN_BYTES / width.max(1);
        let mut pending = Vec::new();
        for (rank, start, positions) in self.chunks(max) {
            let get = ep.get_start(
                mem.unit_of_rank(rank),
                mem.segment(),
                (start * width) as u64,
                positions.len() * width,
            )?;
            pending.push((get, positions.to_vec()));
        }
        Ok(pending)
    }

    /// Waits for gets issued by [`Transfer::start_gets`] and scatters them into `dst`.
    pub fn finish_gets<T: Pod>(pending: Vec<(PendingGet, Vec<usize>)>, dst: &mut [T]) -> Result<()> {
        let width = size_of::<T>();
        for (get, positions) in pending {
            let bytes = get.wait()?;
            for (i, &pos) in positions.iter().enumerate() {
                dst[pos] = bytemuck::pod_read_unaligned(&bytes[i * width..(i + 1) * width]);
            }
        }
        Ok(())
    }

    pub fn fetch<T: Pod>(&self, mem: &GlobalMemory<T>, dst: &mut [T]) -> Result<()> {
        let pending = self.start_gets(mem)?;
        Transfer::finish_gets(pending, dst)
    }

    /// Puts `src[positions]` into the runs. Locally complete on return.
    pub fn store<T: Pod>(&self, mem: &GlobalMemory<T>, src: &[T]) -> Result<()> {
        let ep = &mem.runtime().endpoint;
        let width = size_of::<T>();
        let max = MAX_RUN_BYTES / width.max(1);
        let mut buf = Vec::new();
        for (rank, start, positions) in self.chunks(max) {
            buf.clear();
            for &pos in positions {
                buf.extend_from_slice(bytemuck::bytes_of(&src[pos]));
            }
            ep.put(mem.unit_of_rank(rank), mem.segment(), (start * width) as u64, &buf)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_consecutive_offsets_per_rank() {
        // Cyclic over two ranks: positions alternate, offsets are consecutive.
        let elems = (0..6).map(|i| (i, UnitId((i % 2) as u32), i / 2));
        let t = Transfer::from_elements(elems);
        assert_eq!(t.runs.iter().map(|r| r.positions.len()).sum::<usize>(), 6);
        assert_eq!(
            t.runs,
            vec![
                Run { rank: UnitId(0), start: 0, positions: vec![0, 2, 4] },
                Run { rank: UnitId(1), start: 0, positions: vec![1, 3, 5] },
            ]
        );
    }

    #[test]
    fn gaps_split_runs() {
        let t = Transfer::from_elements([(0, UnitId(0), 5), (1, UnitId(0), 7), (2, UnitId(0), 6), (3, UnitId(0), 9)]);
        let shapes: Vec<(usize, Vec<usize>)> = t.runs.iter().map(|r| (r.start, r.positions.clone())).collect();
        assert_eq!(shapes, vec![(5, vec![0, 2, 1]), (9, vec![3])]);
    }

    #[test]
    fn chunking_covers_every_element_once() {
        let t = Transfer::from_runs(vec![Run { rank: UnitId(2), start: 3, positions: (0..10).collect() }]);
        let chunks: Vec<_> = t.chunks(4).map(|(r, s, p)| (r, s, p.to_vec())).collect();
        assert_eq!(
            chunks,
            vec![
                (UnitId(2), 3, vec![0, 1, 2, 3]),
                (UnitId(2), 7, vec![4, 5, 6, 7]),
                (UnitId(2), 11, vec![8, 9]),
            ]
        );
    }
}
