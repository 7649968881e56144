//! Benchmark drivers: local update throughput (GUPS) and `min_element`
//! scaling. Both are SPMD bodies run on every unit.

use std::fmt;
use std::hint::black_box;
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::algorithms;
use crate::containers::DistributedArray;
use crate::error::{Error, Result};
use crate::pattern::Distribution;
use crate::runtime::{Context, UnitId};

pub const CSV_HEADER: &str = "name,n,units,variant,reps,metric,unit_of_measure";

/// Smallest repetition count accepted for a timing.
pub const MIN_REPS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub name: String,
    pub n: u64,
    pub units: usize,
    pub variant: String,
    pub reps: usize,
    /// Median over the repetitions.
    pub metric: f64,
    pub unit_of_measure: String,
    /// Seconds since the Unix epoch when the result was produced.
    pub timestamp: u64,
}

impl BenchResult {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.name, self.n, self.units, self.variant, self.reps, self.metric, self.unit_of_measure
        )
    }

    /// Parses a row in [`CSV_HEADER`] layout.
    pub fn from_csv_row(row: &str) -> Result<BenchResult> {
        let fields: Vec<&str> = row.trim().split(',').collect();
        let bad = || Error::Benchmark(format!("malformed result row {row:?}"));
        if fields.len() != 7 {
            return Err(bad());
        }
        Ok(BenchResult {
            name: fields[0].to_string(),
            n: fields[1].parse().map_err(|_| bad())?,
            units: fields[2].parse().map_err(|_| bad())?,
            variant: fields[3].to_string(),
            reps: fields[4].parse().map_err(|_| bad())?,
            metric: fields[5].parse().map_err(|_| bad())?,
            unit_of_measure: fields[6].to_string(),
            timestamp: 0,
        })
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GupsVariant {
    /// `local[i] += 1` through the array's local view.
    LocalSubscript,
    /// Mutable iteration over the local view.
    LocalIterator,
    /// Raw pointer walk from `lbegin()`.
    LocalPointer,
    /// A plain heap buffer outside global memory, subscripted.
    RawBuffer,
    /// A `Vec`, subscripted.
    ReferenceSequentialContainer,
    /// Global index → owner/offset lookup on every access. Deliberately slow;
    /// shows the harness resolves differences.
    IndirectLookup,
}

impl GupsVariant {
    pub const ALL: [GupsVariant; 6] = [
        GupsVariant::LocalSubscript,
        GupsVariant::LocalIterator,
        GupsVariant::LocalPointer,
        GupsVariant::RawBuffer,
        GupsVariant::ReferenceSequentialContainer,
        GupsVariant::IndirectLookup,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GupsVariant::LocalSubscript => "local_subscript",
            GupsVariant::LocalIterator => "local_iterator",
            GupsVariant::LocalPointer => "local_pointer",
            GupsVariant::RawBuffer => "raw_buffer",
            GupsVariant::ReferenceSequentialContainer => "reference_sequential_container",
            GupsVariant::IndirectLookup => "indirect_lookup",
        }
    }
}

impl fmt::Display for GupsVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GupsVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<GupsVariant> {
        GupsVariant::ALL
            .into_iter()
            .find(|v| v.name() == s.replace('-', "_"))
            .ok_or_else(|| {
                let names: Vec<&str> = GupsVariant::ALL.iter().map(|v| v.name()).collect();
                Error::usage(format!("unknown variant {s:?}, expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GupsParams {
    pub n_local: usize,
    pub rounds: usize,
    pub variant: GupsVariant,
    pub reps: usize,
}

enum Storage {
    Global(DistributedArray<u64>),
    Raw(Box<[u64]>),
    Vec(Vec<u64>),
}

#[allow(clippy::needless_range_loop)]
fn update_rounds(storage: &mut Storage, variant: GupsVariant, rounds: usize) {
    match (storage, variant) {
        (Storage::Global(arr), GupsVariant::LocalSubscript) => {
            let mut view = arr.local_view();
            for _ in 0..rounds {
                let v = black_box(&mut view);
                for i in 0..v.len() {
                    v[i] += 1;
                }
            }
        }
        (Storage::Global(arr), GupsVariant::LocalIterator) => {
            let mut view = arr.local_view();
            for _ in 0..rounds {
                for x in black_box(&mut view).iter_mut() {
                    *x += 1;
                }
            }
        }
        (Storage::Global(arr), GupsVariant::LocalPointer) => {
            let mut view = arr.local_view();
            let n = view.len();
            for _ in 0..rounds {
                let p = black_box(view.lbegin());
                for i in 0..n {
                    // SAFETY: i < local length.
                    unsafe { *p.add(i) += 1 };
                }
            }
        }
        (Storage::Global(arr), GupsVariant::IndirectLookup) => {
            let rank = arr.my_rank();
            let n = arr.local().len();
            let pattern = arr.pattern().clone();
            let local = arr.local_mut();
            for _ in 0..rounds {
                let local = black_box(&mut *local);
                for i in 0..n {
                    let g = pattern.index_of_local(rank, i).expect("local offset in range");
                    let (owner, off) = pattern.local_of_index(g).expect("index in range");
                    debug_assert_eq!(owner, rank);
                    local[off] += 1;
                }
            }
        }
        (Storage::Raw(buf), _) => {
            for _ in 0..rounds {
                let b = black_box(&mut *buf);
                for i in 0..b.len() {
                    b[i] += 1;
                }
            }
        }
        (Storage::Vec(v), _) => {
            for _ in 0..rounds {
                let v = black_box(&mut *v);
                for i in 0..v.len() {
                    v[i] += 1;
                }
            }
        }
        (Storage::Global(_), v) => unreachable!("{v} does not use global storage"),
    }
}

fn storage_slice(storage: &mut Storage) -> &mut [u64] {
    match storage {
        Storage::Global(arr) => arr.local_mut(),
        Storage::Raw(b) => b,
        Storage::Vec(v) => v,
    }
}

/// Every unit increments each of its `n_local` elements `rounds` times.
/// Returns the median aggregate update rate (updates per second) on every unit.
pub fn run_gups(ctx: &Context, params: GupsParams) -> Result<BenchResult> {
    if params.reps < MIN_REPS {
        return Err(Error::usage(format!("at least {MIN_REPS} repetitions are required")));
    }
    if params.n_local == 0 || params.rounds == 0 {
        return Err(Error::usage("n_local and rounds must be positive"));
    }
    let team = ctx.team_all();
    let units = team.size();
    let mut storage = match params.variant {
        GupsVariant::RawBuffer => Storage::Raw(vec![0u64; params.n_local].into_boxed_slice()),
        GupsVariant::ReferenceSequentialContainer => Storage::Vec(vec![0u64; params.n_local]),
        _ => Storage::Global(DistributedArray::new(team, params.n_local * units)?),
    };
    let mut times = Vec::with_capacity(params.reps);
    for _ in 0..params.reps {
        storage_slice(&mut storage).fill(0);
        team.barrier()?;
        let start = Instant::now();
        update_rounds(&mut storage, params.variant, params.rounds);
        let mine = start.elapsed().as_secs_f64();
        team.barrier()?;
        let slowest = team.reduce(mine, f64::max)?;

        let expected = params.rounds as u64;
        let wrong = storage_slice(&mut storage).iter().filter(|&&x| x != expected).count() as u64;
        let wrong = team.reduce(wrong, |a, b| a + b)?;
        if wrong > 0 {
            return Err(Error::Benchmark(format!(
                "{wrong} element(s) differ from {expected} after {} rounds of {}",
                params.rounds, params.variant
            )));
        }
        times.push(slowest);
    }
    let secs = median(&times).max(f64::MIN_POSITIVE);
    let updates = (params.n_local * params.rounds * units) as f64;
    Ok(BenchResult {
        name: "gups".into(),
        n: params.n_local as u64,
        units,
        variant: params.variant.name().into(),
        reps: params.reps,
        metric: updates / secs,
        unit_of_measure: "updates/s".into(),
        timestamp: now(),
    })
}

/// Pseudo-random element `i` of the min_element input (splitmix64).
pub fn element_value(seed: u64, i: u64) -> u32 {
    let mut z = seed.wrapping_add(i.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    ((z ^ (z >> 31)) >> 32) as u32
}

/// Sequential reference: first index of the minimum of the generated input.
pub fn min_element_oracle(seed: u64, n: usize) -> Option<(usize, u32)> {
    let mut best: Option<(usize, u32)> = None;
    for i in 0..n {
        let v = element_value(seed, i as u64);
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best
}

pub const MIN_ELEMENT_SEED: u64 = 0x0005_eed0_fa11;

/// Times `min_element` over `n` pseudo-random `u32`s, BLOCKED over all units.
/// The result is validated against [`min_element_oracle`] before the median
/// time is reported.
pub fn run_min_element(ctx: &Context, n: usize, reps: usize) -> Result<BenchResult> {
    if reps < MIN_REPS {
        return Err(Error::usage(format!("at least {MIN_REPS} repetitions are required")));
    }
    let team = ctx.team_all();
    let arr = DistributedArray::<u32>::with_dist(team, n, Distribution::Blocked)?;
    algorithms::generate(arr.range(), |i| element_value(MIN_ELEMENT_SEED, i as u64))?;

    let mut times = Vec::with_capacity(reps);
    let mut found = None;
    for _ in 0..reps {
        team.barrier()?;
        let start = Instant::now();
        let it = algorithms::min_element(arr.range())?;
        let mine = start.elapsed().as_secs_f64();
        times.push(team.reduce(mine, f64::max)?);
        found = Some(it.index());
    }

    // Rank 0 checks against the sequential scan and shares the verdict.
    let ok = if team.my_id() == UnitId(0) {
        let expected = min_element_oracle(MIN_ELEMENT_SEED, n).map_or(n, |(i, _)| i);
        u8::from(found == Some(expected))
    } else {
        0
    };
    if team.broadcast(UnitId(0), ok)? != 1 {
        return Err(Error::Benchmark(format!(
            "min_element returned index {found:?}, which disagrees with the sequential scan"
        )));
    }
    Ok(BenchResult {
        name: "min_element".into(),
        n: n as u64,
        units: team.size(),
        variant: ctx.transport_kind().name().into(),
        reps,
        metric: median(&times),
        unit_of_measure: "s".into(),
        timestamp: now(),
    })
}
