//! Protocol stress drivers shared by the transport tests and the acceptance
//! suite.

#![allow(dead_code)]

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use pgas::{DistributedArray, GlobalMemory, TransportKind, UnitId};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::run;

const UNITS: usize = 4;
const WINDOW: usize = 512;

/// Every unit runs `trials / UNITS` put → flush → get round trips of random
/// payloads into its own window on random targets; afterwards each unit
/// re-reads the final contents written by its right neighbour. Returns the
/// number of mismatching trials plus mismatching final windows.
pub fn round_trips(transport: TransportKind, trials: usize, seed: u64) -> usize {
    let per_unit = trials.div_ceil(UNITS);
    let counts = run(transport, UNITS, |ctx| {
        let me = ctx.my_id().index();
        let arr = DistributedArray::<u8>::new_filled(ctx.team_all(), UNITS * UNITS * WINDOW, pgas::Distribution::Blocked, 0)
            .unwrap();
        let base = |target: usize, initiator: usize| (target * UNITS + initiator) * WINDOW;
        let mut rng = StdRng::seed_from_u64(seed ^ ((me as u64) << 32));
        let mut bad = 0;
        for _ in 0..per_unit {
            let target = rng.gen_range(0..UNITS);
            let len = rng.gen_range(1..=64);
            let off = rng.gen_range(0..=WINDOW - len);
            let payload: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let start = base(target, me) + off;
            arr.slice(start..start + len).unwrap().put(&payload).unwrap();
            ctx.flush(UnitId(target as u32)).unwrap();
            let mut back = vec![0u8; len];
            arr.slice(start..start + len).unwrap().get(&mut back).unwrap();
            bad += usize::from(back != payload);
        }
        ctx.barrier().unwrap();
        // Cross-unit check: the neighbour's windows as it last wrote them.
        let neighbour = (me + 1) % UNITS;
        let theirs: Vec<Vec<u8>> = (0..UNITS)
            .map(|t| {
                let mut buf = vec![0u8; WINDOW];
                arr.slice(base(t, neighbour)..base(t, neighbour) + WINDOW)
                    .unwrap()
                    .get(&mut buf)
                    .unwrap();
                buf
            })
            .collect();
        let mut rng = StdRng::seed_from_u64(seed ^ ((neighbour as u64) << 32));
        let mut expected = vec![vec![0u8; WINDOW]; UNITS];
        for _ in 0..per_unit {
            let target = rng.gen_range(0..UNITS);
            let len = rng.gen_range(1..=64);
            let off = rng.gen_range(0..=WINDOW - len);
            let payload: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            expected[target][off..off + len].copy_from_slice(&payload);
        }
        bad += usize::from(theirs != expected);
        ctx.barrier().unwrap();
        bad
    });
    counts.into_iter().sum()
}

/// Four writers hammer a few 8-byte slots on unit 0 with values whose bytes
/// are all equal; unit 0 and a remote reader check every value they load.
/// Returns (loads checked, torn values seen).
pub fn torn_reads(transport: TransportKind, duration: Duration) -> (u64, u64) {
    const SLOTS: usize = 4;
    let loads = AtomicU64::new(0);
    let torn = AtomicU64::new(0);
    run(transport, 6, |ctx| {
        let me = ctx.my_id().index();
        let mem = GlobalMemory::<u64>::allocate(ctx.team_all(), if me == 0 { SLOTS } else { 0 }).unwrap();
        let start = Instant::now();
        match me {
            1..=4 => {
                let pattern = 0x0101_0101_0101_0101u64;
                let mut k = 0u64;
                while start.elapsed() < duration {
                    let byte = (me as u64 * 50 + k % 50) & 0xff;
                    mem.at(UnitId(0), (k as usize) % SLOTS).unwrap().store(pattern * byte).unwrap();
                    k += 1;
                }
                ctx.flush(UnitId(0)).unwrap();
            }
            _ => {
                let mut seen = 0;
                let mut bad = 0;
                while start.elapsed() < duration {
                    let v = mem.at(UnitId(0), seen % SLOTS).unwrap().load().unwrap();
                    bad += u64::from(v.to_le_bytes().iter().any(|&b| b != v as u8));
                    seen += 1;
                }
                loads.fetch_add(seen as u64, Ordering::Relaxed);
                torn.fetch_add(bad, Ordering::Relaxed);
            }
        }
        ctx.barrier().unwrap();
    });
    (loads.into_inner(), torn.into_inner())
}
