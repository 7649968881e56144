//! Collective algorithms over global ranges.
//!
//! Every unit of the range's team calls the algorithm with the same range.
//! Each unit works on the elements of the range it owns, then the partial
//! results are combined with a team collective. Units that own nothing still
//! take part in the combine step. Values are returned on every unit.
//!
//! The `copy` family is the exception: it is one-sided and only the caller
//! participates.

use std::mem::size_of;

use bytemuck::Pod;

use crate::error::{Error, Result};
use crate::memory::{AsyncHandle, GlobalIter, GlobalRange, Transfer};
use crate::runtime::{Check, TeamInner, UnitId};

/// Elements of a range owned by the calling unit.
enum LocalPart {
    /// One-dimensional patterns: local offsets `lo..hi`, global indices increase with the offset.
    Span { rank: UnitId, lo: usize, hi: usize },
    /// `(local offset, global index)` sorted by global index.
    List(Vec<(usize, usize)>),
}

impl LocalPart {
    fn of<T: Pod>(r: &GlobalRange<'_, T>) -> LocalPart {
        let pattern = r.pattern();
        let rank = rank_of(r);
        if pattern.ndim() == 1 {
            let (lo, hi) = pattern.local_span_1d(rank, r.indices());
            LocalPart::Span { rank, lo, hi }
        } else {
            LocalPart::List(r.local_part())
        }
    }

    fn for_each(&self, r_pattern: &crate::pattern::Pattern, mut f: impl FnMut(usize, usize)) {
        match self {
            LocalPart::Span { rank, lo, hi } => {
                for l in *lo..*hi {
                    f(l, r_pattern.index_of_local_1d(*rank, l));
                }
            }
            LocalPart::List(items) => {
                for &(l, g) in items {
                    f(l, g);
                }
            }
        }
    }
}

fn rank_of<T: Pod>(r: &GlobalRange<'_, T>) -> UnitId {
    UnitId(r.memory().team().position as u32)
}

fn team_of<'a, T: Pod>(r: &GlobalRange<'a, T>) -> &'a TeamInner {
    r.memory().team()
}

fn check<T: Pod>(kind: &str, r: &GlobalRange<'_, T>, extra: &[u8]) -> Check {
    let mut args = Vec::with_capacity(24 + extra.len());
    args.extend_from_slice(&(r.begin().index() as u64).to_le_bytes());
    args.extend_from_slice(&(r.end().index() as u64).to_le_bytes());
    args.extend_from_slice(&(size_of::<T>() as u64).to_le_bytes());
    args.extend_from_slice(extra);
    Check::of(kind, &args)
}

/// Local storage of the range's memory. Algorithms hold it only between
/// collectives, while no other local view can be live on this unit's thread.
#[allow(clippy::mut_from_ref)]
fn local_storage<'a, T: Pod>(r: &GlobalRange<'a, T>) -> &'a mut [T] {
    // SAFETY: see above; remote puts racing with a collective are the
    // program's error.
    unsafe { r.memory().local_unchecked_mut() }
}

/// Gathers one optional value per member, in rank order.
fn gather_partials<T: Pod>(team: &TeamInner, value: Option<T>, check: Check) -> Result<Vec<Option<T>>> {
    let payload = value.map(|v| bytemuck::bytes_of(&v).to_vec()).unwrap_or_default();
    let parts = team.allgather(payload, check)?;
    parts
        .into_iter()
        .map(|p| match p.len() {
            0 => Ok(None),
            n if n == size_of::<T>() && n > 0 => Ok(Some(bytemuck::pod_read_unaligned(&p))),
            n => Err(Error::usage(format!("partial result of {n} bytes, expected {}", size_of::<T>()))),
        })
        .collect()
}

/// Sets every element of `r` to `value`.
pub fn fill<T: Pod>(r: GlobalRange<'_, T>, value: T) -> Result<()> {
    let team = team_of(&r);
    team.rt.check_active()?;
    let local = local_storage(&r);
    match LocalPart::of(&r) {
        LocalPart::Span { lo, hi, .. } => local[lo..hi].fill(value),
        LocalPart::List(items) => items.iter().for_each(|&(l, _)| local[l] = value),
    }
    team.barrier(check("fill", &r, bytemuck::bytes_of(&value)))
}

/// Sets the element at global index `i` to `f(i)`.
pub fn generate<T: Pod>(r: GlobalRange<'_, T>, f: impl Fn(usize) -> T) -> Result<()> {
    let team = team_of(&r);
    team.rt.check_active()?;
    let local = local_storage(&r);
    LocalPart::of(&r).for_each(r.pattern(), |l, g| local[l] = f(g));
    team.barrier(check("generate", &r, &[]))
}

/// Applies `f` once to every element, on the unit that owns it.
pub fn for_each<T: Pod>(r: GlobalRange<'_, T>, mut f: impl FnMut(&mut T)) -> Result<()> {
    let team = team_of(&r);
    team.rt.check_active()?;
    let local = local_storage(&r);
    LocalPart::of(&r).for_each(r.pattern(), |l, _| f(&mut local[l]));
    team.barrier(check("for_each", &r, &[]))
}

/// `output[i] = f(input[i])`. The owner of each output element computes it,
/// fetching its input if it lives elsewhere.
pub fn transform<T: Pod, U: Pod>(
    input: GlobalRange<'_, T>,
    output: GlobalRange<'_, U>,
    f: impl Fn(T) -> U,
) -> Result<()> {
    if input.len() != output.len() {
        return Err(Error::LengthMismatch {
            expected: output.len(),
            got: input.len(),
        });
    }
    let team = team_of(&output);
    team.rt.check_active()?;
    let mut extra = Vec::new();
    extra.extend_from_slice(&(input.begin().index() as u64).to_le_bytes());
    extra.extend_from_slice(&(size_of::<T>() as u64).to_le_bytes());
    let chk = check("transform", &output, &extra);
    let part = LocalPart::of(&output);
    let out_base = output.memory().local_base();

    let aligned = input.pattern() == output.pattern() && input.begin().index() == output.begin().index();
    if aligned && rank_of(&input) == rank_of(&output) {
        // Inputs of the owned outputs are local at the same offsets.
        let in_base = input.memory().local_base();
        part.for_each(output.pattern(), |l, _| {
            // SAFETY: l < local count of both allocations (same pattern);
            // raw accesses keep in-place transforms free of aliasing slices.
            unsafe {
                let v = in_base.add(l).read();
                out_base.add(l).write(f(v));
            }
        });
        return team.barrier(chk);
    }

    let mut slots = Vec::new();
    part.for_each(output.pattern(), |l, g| slots.push((l, g)));
    let in_pattern = input.pattern();
    let shift = input.begin().index() as isize - output.begin().index() as isize;
    let plan = Transfer::from_elements(slots.iter().enumerate().map(|(pos, &(_, g))| {
        let src = g.wrapping_add_signed(shift);
        let (rank, off) = in_pattern.local_of_index(src).expect("input index in range");
        (pos, rank, off)
    }));
    let mut inputs = vec![T::zeroed(); slots.len()];
    plan.fetch(input.memory(), &mut inputs)?;
    // Everyone has read its inputs before anyone overwrites them.
    team.barrier(chk)?;
    for (&(l, _), v) in slots.iter().zip(inputs) {
        // SAFETY: l is a local offset of the output allocation.
        unsafe { out_base.add(l).write(f(v)) };
    }
    team.barrier(chk)
}

/// Left fold of `init` with every element. Each unit folds its own elements
/// in index order; the partial results are then folded in rank order.
pub fn accumulate<T: Pod>(r: GlobalRange<'_, T>, init: T, op: impl Fn(T, T) -> T) -> Result<T> {
    let team = team_of(&r);
    team.rt.check_active()?;
    let local = local_storage(&r);
    let mut partial: Option<T> = None;
    let mut add = |v: T| partial = Some(partial.map_or(v, |p| op(p, v)));
    match LocalPart::of(&r) {
        LocalPart::Span { lo, hi, .. } => local[lo..hi].iter().for_each(|&v| add(v)),
        LocalPart::List(items) => items.iter().for_each(|&(l, _)| add(local[l])),
    }
    let partials = gather_partials(team, partial, check("accumulate", &r, bytemuck::bytes_of(&init)))?;
    Ok(partials.into_iter().flatten().fold(init, &op))
}

/// Position of the first element `best` prefers over all others: `better(a, b)`
/// is true if `a` should replace `b`. Ties keep the smaller global index.
fn select<'a, T: Pod>(
    r: GlobalRange<'a, T>,
    kind: &str,
    better: impl Fn(&T, &T) -> bool,
) -> Result<GlobalIter<'a, T>> {
    let team = team_of(&r);
    team.rt.check_active()?;
    let local = local_storage(&r);
    let mut best: Option<(T, usize)> = None;
    match LocalPart::of(&r) {
        LocalPart::Span { rank, lo, hi } => {
            let slice = &local[lo..hi];
            if let Some(first) = slice.first() {
                let mut pos = 0;
                let mut value = *first;
                for (i, v) in slice.iter().enumerate().skip(1) {
                    if better(v, &value) {
                        value = *v;
                        pos = i;
                    }
                }
                best = Some((value, r.pattern().index_of_local_1d(rank, lo + pos)));
            }
        }
        LocalPart::List(items) => {
            for &(l, g) in &items {
                let v = local[l];
                if best.as_ref().is_none_or(|(b, _)| better(&v, b)) {
                    best = Some((v, g));
                }
            }
        }
    }
    #[derive(Clone, Copy)]
    #[repr(C)]
    struct Candidate<T> {
        index: u64,
        value: T,
    }
    let payload = best
        .map(|(value, index)| {
            let mut bytes = (index as u64).to_le_bytes().to_vec();
            bytes.extend_from_slice(bytemuck::bytes_of(&value));
            bytes
        })
        .unwrap_or_default();
    let parts = team.allgather(payload, check(kind, &r, &[]))?;
    let mut winner: Option<Candidate<T>> = None;
    for p in parts {
        if p.is_empty() {
            continue;
        }
        if p.len() != 8 + size_of::<T>() {
            return Err(Error::usage("candidate width mismatch"));
        }
        let c = Candidate {
            index: u64::from_le_bytes(p[..8].try_into().unwrap()),
            value: bytemuck::pod_read_unaligned::<T>(&p[8..]),
        };
        winner = match winner {
            None => Some(c),
            Some(w) if better(&c.value, &w.value) || (!better(&w.value, &c.value) && c.index < w.index) => Some(c),
            keep => keep,
        };
    }
    Ok(match winner {
        Some(w) => r.begin() + (w.index as usize - r.begin().index()) as isize,
        None => r.end(),
    })
}

/// Iterator to the smallest element (the first one on ties); `end` if empty.
pub fn min_element<'a, T: Pod + PartialOrd>(r: GlobalRange<'a, T>) -> Result<GlobalIter<'a, T>> {
    select(r, "min_element", |a, b| a < b)
}

/// Iterator to the largest element (the first one on ties); `end` if empty.
pub fn max_element<'a, T: Pod + PartialOrd>(r: GlobalRange<'a, T>) -> Result<GlobalIter<'a, T>> {
    select(r, "max_element", |a, b| a > b)
}

/// Iterator to the first element equal to `value`, or `end`.
pub fn find<'a, T: Pod + PartialEq>(r: GlobalRange<'a, T>, value: T) -> Result<GlobalIter<'a, T>> {
    find_if(r, |v| *v == value)
}

/// Iterator to the first element satisfying `pred`, or `end`.
pub fn find_if<'a, T: Pod>(r: GlobalRange<'a, T>, pred: impl Fn(&T) -> bool) -> Result<GlobalIter<'a, T>> {
    let team = team_of(&r);
    team.rt.check_active()?;
    let local = local_storage(&r);
    let mut found: Option<u64> = None;
    match LocalPart::of(&r) {
        LocalPart::Span { rank, lo, hi } => {
            if let Some(p) = local[lo..hi].iter().position(&pred) {
                found = Some(r.pattern().index_of_local_1d(rank, lo + p) as u64);
            }
        }
        LocalPart::List(items) => {
            found = items.iter().find(|&&(l, _)| pred(&local[l])).map(|&(_, g)| g as u64);
        }
    }
    // The lowest global index wins, whichever rank found it.
    let first = gather_partials(team, found, check("find", &r, &[]))?
        .into_iter()
        .flatten()
        .min();
    Ok(match first {
        Some(g) => r.begin() + (g as usize - r.begin().index()) as isize,
        None => r.end(),
    })
}

fn count_matching<T: Pod>(r: &GlobalRange<'_, T>, kind: &str, pred: impl Fn(&T) -> bool) -> Result<u64> {
    let team = team_of(r);
    team.rt.check_active()?;
    let local = local_storage(r);
    let n = match LocalPart::of(r) {
        LocalPart::Span { lo, hi, .. } => local[lo..hi].iter().filter(|v| pred(v)).count(),
        LocalPart::List(items) => items.iter().filter(|&&(l, _)| pred(&local[l])).count(),
    };
    let all = team.allgather_values(n as u64, check(kind, r, &[]))?;
    Ok(all.into_iter().sum())
}

pub fn all_of<T: Pod>(r: GlobalRange<'_, T>, pred: impl Fn(&T) -> bool) -> Result<bool> {
    Ok(count_matching(&r, "all_of", |v| !pred(v))? == 0)
}

pub fn any_of<T: Pod>(r: GlobalRange<'_, T>, pred: impl Fn(&T) -> bool) -> Result<bool> {
    Ok(count_matching(&r, "any_of", pred)? > 0)
}

pub fn none_of<T: Pod>(r: GlobalRange<'_, T>, pred: impl Fn(&T) -> bool) -> Result<bool> {
    Ok(count_matching(&r, "none_of", pred)? == 0)
}

/// One-sided copy of a global range into a local buffer.
pub fn copy<T: Pod>(src: GlobalRange<'_, T>, dst: &mut [T]) -> Result<()> {
    src.get(dst)
}

/// One-sided copy of a local buffer into a global range. Locally complete on
/// return; visible to others after a flush or barrier.
pub fn copy_to_global<T: Pod>(src: &[T], dst: GlobalRange<'_, T>) -> Result<()> {
    dst.put(src)
}

pub fn copy_async<'b, T: Pod>(src: GlobalRange<'b, T>, dst: &'b mut [T]) -> Result<AsyncHandle<'b>> {
    src.get_async(dst)
}

pub fn copy_to_global_async<'a, T: Pod>(src: &[T], dst: GlobalRange<'a, T>) -> Result<AsyncHandle<'a>> {
    dst.put_async(src)
}

/// One-sided copy between two global ranges, staged through a local buffer.
/// Overlapping ranges of the same container are rejected.
pub fn copy_global<T: Pod>(src: GlobalRange<'_, T>, dst: GlobalRange<'_, T>) -> Result<()> {
    if src.len() != dst.len() {
        return Err(Error::LengthMismatch {
            expected: dst.len(),
            got: src.len(),
        });
    }
    let same = std::ptr::eq(src.memory(), dst.memory());
    let a = src.indices();
    let b = dst.indices();
    if same && a.start < b.end && b.start < a.end {
        return Err(Error::usage("overlapping global-to-global copy"));
    }
    let mut buf = vec![T::zeroed(); src.len()];
    src.get(&mut buf)?;
    dst.put(&buf)
}
