mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use common::{each_config, run, TRANSPORTS};
use pgas::runtime::split_ranges;
use pgas::{launch, Context, DistributedArray, Error, LocalityMap, RuntimeConfig, TransportKind, UnitId};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn four_units_have_dense_ids() {
    for t in TRANSPORTS {
        let mut ids = run(t, 4, |ctx| {
            assert_eq!(ctx.n_units(), 4);
            assert_eq!(pgas::n_units().unwrap(), 4);
            assert_eq!(pgas::my_id().unwrap(), ctx.my_id());
            assert_eq!(ctx.my_id(), ctx.my_id());
            ctx.my_id().0
        });
        ids.sort();
        assert_eq!(ids, [0, 1, 2, 3]);
    }
}

#[test]
fn single_unit_barrier_returns() {
    let mut ctx = Context::init(&RuntimeConfig::in_process(1)).unwrap();
    assert_eq!(ctx.team_all().size(), 1);
    ctx.barrier().unwrap();
    ctx.finalize().unwrap();
}

#[test]
fn unreachable_rendezvous_fails_every_unit() {
    let config = RuntimeConfig::tcp(4)
        .with_rendezvous("127.0.0.1:1")
        .with_startup_timeout(Duration::from_millis(300));
    let err = launch(&config, |_| ()).unwrap_err();
    assert!(matches!(err, Error::Startup(_)), "{err}");
    // One process-style unit on its own sees the same.
    let h = thread::spawn(move || Context::init(&config.with_unit_id(2)).map(|_| ()));
    assert!(matches!(h.join().unwrap(), Err(Error::Startup(_))));
}

#[test]
fn finalize_twice_and_duplicate_init_are_usage_errors() {
    thread::spawn(|| {
        let mut ctx = Context::init(&RuntimeConfig::in_process(1)).unwrap();
        assert!(matches!(
            Context::init(&RuntimeConfig::in_process(1)).unwrap_err(),
            Error::Usage(_)
        ));
        ctx.finalize().unwrap();
        assert!(ctx.is_finalized());
        assert!(matches!(ctx.finalize().unwrap_err(), Error::Usage(_)));
        assert!(matches!(ctx.barrier().unwrap_err(), Error::Usage(_)));
    })
    .join()
    .unwrap();
}

#[test]
fn ids_before_init_are_usage_errors() {
    thread::spawn(|| {
        assert!(matches!(pgas::my_id().unwrap_err(), Error::Usage(_)));
        assert!(matches!(pgas::n_units().unwrap_err(), Error::Usage(_)));
    })
    .join()
    .unwrap();
}

#[test]
fn finalize_with_pending_async_is_a_usage_error() {
    thread::spawn(|| {
        let mut ctx = Context::init(&RuntimeConfig::in_process(1)).unwrap();
        let arr = DistributedArray::<u32>::new(ctx.team_all(), 8).unwrap();
        let mut buf = [0u32; 8];
        let handle = arr.range().get_async(&mut buf).unwrap();
        if cfg!(debug_assertions) {
            assert!(matches!(ctx.finalize().unwrap_err(), Error::Usage(_)));
        }
        drop(handle);
        drop(arr);
        if !ctx.is_finalized() {
            ctx.finalize().unwrap();
        }
    })
    .join()
    .unwrap();
}

#[test]
fn barrier_is_a_fence_under_random_delays() {
    for t in TRANSPORTS {
        for round in 0..5 {
            let entries = Mutex::new(Vec::new());
            let exits = Mutex::new(Vec::new());
            let start = Instant::now();
            run(t, 4, |ctx| {
                let delay = rand::thread_rng().gen_range(0..20) + 5 * (3 - ctx.my_id().index() as u64) * (round % 2);
                thread::sleep(Duration::from_millis(delay));
                entries.lock().unwrap().push(start.elapsed());
                ctx.barrier().unwrap();
                exits.lock().unwrap().push(start.elapsed());
            });
            let last_entry = entries.into_inner().unwrap().into_iter().max().unwrap();
            let first_exit = exits.into_inner().unwrap().into_iter().min().unwrap();
            assert!(last_entry <= first_exit, "{t:?}: entry {last_entry:?} after exit {first_exit:?}");
        }
    }
}

#[test]
fn no_unit_leaves_a_barrier_early() {
    let entered = AtomicUsize::new(0);
    run(TransportKind::InProcess, 8, |ctx| {
        for round in 1..=50 {
            entered.fetch_add(1, Ordering::SeqCst);
            ctx.barrier().unwrap();
            assert!(entered.load(Ordering::SeqCst) >= 8 * round);
            ctx.barrier().unwrap();
        }
    });
}

#[test]
fn split_examples() {
    each_config(&[8], |ctx| {
        let child = ctx.team_all().split(2).unwrap();
        let expected: Vec<UnitId> = if ctx.my_id().index() < 4 { 0..4 } else { 4..8 }.map(UnitId::from).collect();
        assert_eq!(child.members(), &expected[..]);
        assert_eq!(child.my_id().index(), ctx.my_id().index() % 4);
        assert_eq!(child.parent_id(), Some(ctx.team_all().id()));
        child.barrier().unwrap();
        let single = ctx.team_all().split(8).unwrap();
        assert_eq!(single.members(), &[ctx.my_id()]);
        single.barrier().unwrap();
        assert!(matches!(ctx.team_all().split(9).unwrap_err(), Error::Usage(_)));
    });
    run(TransportKind::InProcess, 10, |ctx| {
        let child = ctx.team_all().split(4).unwrap();
        let sizes = ctx.team_all().allgather(child.size() as u32).unwrap();
        assert_eq!(sizes, [3, 3, 3, 3, 3, 3, 2, 2, 2, 2]);
    });
}

#[test]
fn sub_team_ranks_and_collectives() {
    each_config(&[4], |ctx| {
        let half = ctx.team_all().split(2).unwrap();
        if ctx.my_id() == UnitId(3) {
            assert_eq!(half.my_id(), UnitId(1));
        }
        // Collectives on sibling teams run independently.
        let sum = half.reduce(ctx.my_id().0, |a, b| a + b).unwrap();
        assert_eq!(sum, if ctx.my_id().0 < 2 { 1 } else { 5 });
        let arr = DistributedArray::<u32>::new(&half, 10).unwrap();
        pgas::algorithms::generate(arr.range(), |i| i as u32 + 100 * (ctx.my_id().0 / 2)).unwrap();
        let total = pgas::algorithms::accumulate(arr.range(), 0, |a, b| a + b).unwrap();
        let base = if ctx.my_id().0 < 2 { 0 } else { 100 };
        assert_eq!(total, 45 + 10 * base);
    });
}

#[test]
fn mismatched_split_is_detected() {
    if !cfg!(debug_assertions) {
        return;
    }
    each_config(&[2], |ctx| {
        let n = 1 + ctx.my_id().index();
        assert!(matches!(ctx.team_all().split(n).unwrap_err(), Error::Usage(_)));
    });
}

fn split_oracle(size: usize, n: usize) -> Vec<usize> {
    // Deal members out one at a time to the child with the fewest so far.
    let mut sizes = vec![0; n];
    for _ in 0..size {
        let k = (0..n).min_by_key(|&k| (sizes[k], k)).unwrap();
        sizes[k] += 1;
    }
    sizes
}

#[test]
fn split_sizes_match_enumeration() {
    for size in 1..=16 {
        for n in 1..=size {
            let ranges = split_ranges(size, n);
            let sizes: Vec<usize> = ranges.iter().map(|r| r.len()).collect();
            assert_eq!(sizes, split_oracle(size, n), "size {size} n {n}");
            let flat: Vec<usize> = ranges.into_iter().flatten().collect();
            assert_eq!(flat, (0..size).collect::<Vec<_>>());
        }
    }
}

#[test]
fn locality_split() {
    let map = LocalityMap::parse("[[[0, 1], [2, 3]], [[4, 5], [6, 7]]]").unwrap();
    for t in TRANSPORTS {
        let config = common::config(t, 8).with_locality(map.clone());
        launch(&config, |ctx| {
            let node = ctx.team_all().split_locality(0).unwrap();
            let me = ctx.my_id().0;
            let lo = me / 4 * 4;
            assert_eq!(node.members(), &(lo..lo + 4).map(UnitId).collect::<Vec<_>>()[..]);
            let numa = node.split_locality(1).unwrap();
            let lo = me / 2 * 2;
            assert_eq!(numa.members(), &[UnitId(lo), UnitId(lo + 1)]);
            assert!(matches!(numa.split_locality(2).unwrap_err(), Error::Locality(_)));
        })
        .unwrap();
    }

    let flat = LocalityMap::parse("[[0, 1, 2, 3]]").unwrap();
    launch(&RuntimeConfig::in_process(4).with_locality(flat), |ctx| {
        let all = ctx.team_all().split_locality(0).unwrap();
        assert_eq!(all.members(), ctx.team_all().members());
    })
    .unwrap();

    // Unit 3 is in no group: rejected at startup.
    let partial = LocalityMap::parse("[[0, 1], [2]]").unwrap();
    let err = launch(&RuntimeConfig::in_process(4).with_locality(partial), |_| ()).unwrap_err();
    assert!(matches!(err, Error::Locality(_)), "{err}");

    run(TransportKind::InProcess, 2, |ctx| {
        assert!(matches!(ctx.team_all().split_locality(0).unwrap_err(), Error::Locality(_)));
    });
}

#[test]
fn locality_from_file() {
    let path = std::env::temp_dir().join(format!("pgas-locality-{}.json", std::process::id()));
    std::fs::write(&path, "[[0, 2], [1, 3]]").unwrap();
    let map = LocalityMap::from_file(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(map.groups(0).unwrap(), &[vec![0, 2], vec![1, 3]]);
}

#[test]
fn reduce_and_broadcast() {
    each_config(&[1, 4], |ctx| {
        let team = ctx.team_all();
        let me = ctx.my_id().0;
        let n = ctx.n_units() as u32;
        assert_eq!(team.reduce(me + 1, |a, b| a + b).unwrap(), n * (n + 1) / 2);
        let contribution = [[7u32, 3, 9, 3][me as usize % 4], me];
        let min = team
            .reduce(contribution, |a, b| if b[0] < a[0] { b } else { a })
            .unwrap();
        if n == 4 {
            assert_eq!(min, [3, 1]);
        } else {
            assert_eq!(min, [7, 0]);
        }
        assert_eq!(team.broadcast(UnitId(0), if me == 0 { 42u64 } else { 0 }).unwrap(), 42);
        let last = UnitId(n - 1);
        assert_eq!(team.broadcast(last, me * 10).unwrap(), (n - 1) * 10);
        assert!(matches!(team.broadcast(UnitId(n), 0u8).unwrap_err(), Error::Usage(_)));
    });
}

#[test]
fn inconsistent_broadcast_root_is_detected() {
    if !cfg!(debug_assertions) {
        return;
    }
    each_config(&[2], |ctx| {
        let err = ctx.team_all().broadcast(ctx.my_id(), 1u8).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    });
}

#[test]
fn reduce_width_mismatch_is_detected() {
    if !cfg!(debug_assertions) {
        return;
    }
    each_config(&[2], |ctx| {
        let team = ctx.team_all();
        let err = if ctx.my_id().0 == 0 {
            team.reduce(1u32, |a, b| a + b).map(|_| ())
        } else {
            team.reduce(1u64, |a, b| a + b).map(|_| ())
        };
        assert!(matches!(err.unwrap_err(), Error::Usage(_)));
    });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reduce_is_a_rank_order_fold(values in proptest::collection::vec(any::<[i32; 2]>(), 1..7)) {
        // Affine maps compose associatively but not commutatively.
        let maps: Vec<[i64; 2]> = values.iter().map(|v| [v[0] as i64, v[1] as i64]).collect();
        let compose = |f: [i64; 2], g: [i64; 2]| [f[0].wrapping_mul(g[0]), f[1].wrapping_mul(g[0]).wrapping_add(g[1])];
        let expected = maps.iter().copied().reduce(compose).unwrap();
        let got = run(TransportKind::InProcess, maps.len(), |ctx| {
            ctx.team_all().reduce(maps[ctx.my_id().index()], compose).unwrap()
        });
        prop_assert!(got.iter().all(|&g| g == expected));
    }

    #[test]
    fn split_is_a_partition(size in 1usize..10, n_seed in 0usize..100) {
        let n = 1 + n_seed % size;
        let teams = run(TransportKind::InProcess, size, |ctx| {
            let child = ctx.team_all().split(n).unwrap();
            (child.id(), child.members().to_vec())
        });
        let mut seen: Vec<(u64, Vec<UnitId>)> = teams.clone();
        seen.dedup();
        prop_assert_eq!(seen.len(), n);
        let flat: Vec<UnitId> = seen.into_iter().flat_map(|(_, m)| m).collect();
        prop_assert_eq!(flat, (0..size as u32).map(UnitId).collect::<Vec<_>>());
    }
}
