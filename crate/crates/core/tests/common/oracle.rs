//! Sequential references and the randomized algorithm trial shared by the
//! algorithm tests and the acceptance suite.

#![allow(dead_code)]

use pgas::algorithms;
use pgas::{Context, DistributedArray, Distribution, Result};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn first_min(v: &[i64]) -> Option<usize> {
    (0..v.len()).reduce(|best, i| if v[i] < v[best] { i } else { best })
}

pub fn first_max(v: &[i64]) -> Option<usize> {
    (0..v.len()).reduce(|best, i| if v[i] > v[best] { i } else { best })
}

pub fn first_match(v: &[i64], x: i64) -> Option<usize> {
    (0..v.len()).find(|&i| v[i] == x)
}

/// Inputs of one trial. Identical on every unit because the seed is.
pub struct Trial {
    pub values: Vec<i64>,
    pub range: std::ops::Range<usize>,
    pub needle: i64,
    pub threshold: i64,
    pub fill: i64,
    pub other_dist: Distribution,
}

impl Trial {
    pub fn new(seed: u64) -> Trial {
        let mut rng = StdRng::seed_from_u64(seed);
        let n = match rng.gen_range(0..10) {
            0 => rng.gen_range(0..4),
            _ => rng.gen_range(0..400),
        };
        // A narrow value range forces duplicates, so tie-breaking matters.
        let values: Vec<i64> = (0..n).map(|_| rng.gen_range(-40..40)).collect();
        let lo = if n == 0 { 0 } else { rng.gen_range(0..=n) };
        let hi = if rng.gen_bool(0.3) { n } else { rng.gen_range(lo..=n) };
        let range = if rng.gen_bool(0.3) { 0..n } else { lo..hi };
        let needle = if rng.gen_bool(0.8) && !range.is_empty() {
            values[rng.gen_range(range.clone())]
        } else {
            rng.gen_range(-45..45)
        };
        let other_dist = [Distribution::Blocked, Distribution::CYCLIC, Distribution::BlockCyclic(rng.gen_range(1..6))]
            [rng.gen_range(0..3)];
        Trial {
            values,
            range,
            needle,
            threshold: rng.gen_range(-45..45),
            fill: rng.gen_range(-1000..1000),
            other_dist,
        }
    }
}

/// Everything an algorithm returned, in a fixed order. Two transports agree
/// iff their outcomes are equal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub scalars: Vec<i64>,
    pub arrays: Vec<Vec<i64>>,
}

/// Sequential reference for [`run_trial`].
pub fn reference(t: &Trial, dist: Distribution) -> Outcome {
    let v = &t.values;
    let r = t.range.clone();
    let sub = &v[r.clone()];
    let end = r.end as i64;
    let idx = |o: Option<usize>| o.map_or(end, |i| (i + r.start) as i64);
    let pred = |x: &i64| *x > t.threshold;
    let scalars = vec![
        sub.iter().fold(7i64, |a, &b| a.wrapping_add(b)),
        sub.iter().fold(i64::MAX, |a, &b| a.min(b)),
        if dist == Distribution::Blocked {
            sub.last().copied().unwrap_or(-999)
        } else {
            0
        },
        idx(first_min(sub)),
        idx(first_max(sub)),
        idx(first_match(sub, t.needle)),
        sub.iter().all(pred) as i64,
        sub.iter().any(pred) as i64,
        (!sub.iter().any(pred)) as i64,
        sub.len() as i64,
    ];

    let mut gen = v.clone();
    for i in r.clone() {
        gen[i] = (i as i64) * 3 - 5;
    }
    let mut each = gen.clone();
    for x in &mut each[r.clone()] {
        *x = *x * 2 + 1;
    }
    let mut trans = vec![0i64; v.len()];
    for i in r.clone() {
        trans[i] = each[i].wrapping_mul(each[i]) - 1;
    }
    let mut filled = trans.clone();
    for x in &mut filled[r.clone()] {
        *x = t.fill;
    }
    let copied = each[r.clone()].to_vec();
    let mut pushed = vec![0i64; v.len()];
    for (k, i) in r.clone().enumerate() {
        pushed[i] = -(k as i64) - 1;
    }
    let mut cross = vec![0i64; v.len()];
    cross[r.clone()].copy_from_slice(&each[r.clone()]);
    Outcome {
        scalars,
        arrays: vec![v.clone(), gen, each, trans, filled, copied.clone(), copied, pushed, cross],
    }
}

/// Runs every algorithm of the library on the trial's data with `dist` and
/// returns what this unit observed.
pub fn run_trial(ctx: &Context, t: &Trial, dist: Distribution) -> Result<Outcome> {
    let team = ctx.team_all();
    let n = t.values.len();
    let r = t.range.clone();
    let arr = DistributedArray::<i64>::with_dist(team, n, dist)?;
    algorithms::generate(arr.range(), |i| t.values[i])?;
    let gathered = arr.to_vec()?;
    team.barrier()?;

    let sub = arr.slice(r.clone())?;
    let pred = |x: &i64| *x > t.threshold;
    let scalars = vec![
        algorithms::accumulate(sub, 7i64, i64::wrapping_add)?,
        algorithms::accumulate(sub, i64::MAX, i64::min)?,
        // Associative but not commutative: partials combined in rank order
        // match the sequential fold when every unit owns one interval.
        if dist == Distribution::Blocked {
            algorithms::accumulate(sub, -999i64, |_, b| b)?
        } else {
            0
        },
        algorithms::min_element(sub)?.index() as i64,
        algorithms::max_element(sub)?.index() as i64,
        algorithms::find(sub, t.needle)?.index() as i64,
        algorithms::all_of(sub, pred)? as i64,
        algorithms::any_of(sub, pred)? as i64,
        algorithms::none_of(sub, pred)? as i64,
        sub.len() as i64,
    ];

    algorithms::generate(sub, |i| (i as i64) * 3 - 5)?;
    let gen = arr.to_vec()?;
    team.barrier()?;
    algorithms::for_each(sub, |x| *x = *x * 2 + 1)?;
    let each = arr.to_vec()?;
    team.barrier()?;

    let out = DistributedArray::<i64>::new_filled(team, n, t.other_dist, 0)?;
    algorithms::transform(sub, out.slice(r.clone())?, |x| x.wrapping_mul(x) - 1)?;
    let trans = out.to_vec()?;
    team.barrier()?;
    algorithms::fill(out.slice(r.clone())?, t.fill)?;
    let filled = out.to_vec()?;

    // One-sided copies: every unit reads, the last unit writes.
    let mut copied = vec![0i64; r.len()];
    algorithms::copy(sub, &mut copied)?;
    let mut copied_async = vec![0i64; r.len()];
    algorithms::copy_async(sub, &mut copied_async)?.wait()?;

    let target = DistributedArray::<i64>::new_filled(team, n, t.other_dist, 0)?;
    let cross = DistributedArray::<i64>::new_filled(team, n, dist, 0)?;
    let last = ctx.n_units() - 1;
    if ctx.my_id().index() == last {
        let src: Vec<i64> = (0..r.len() as i64).map(|k| -k - 1).collect();
        algorithms::copy_to_global_async(&src, target.slice(r.clone())?)?.wait()?;
        algorithms::copy_global(sub, cross.slice(r.clone())?)?;
    }
    team.barrier()?;
    let pushed = target.to_vec()?;
    let crossed = cross.to_vec()?;
    team.barrier()?;

    Ok(Outcome {
        scalars,
        arrays: vec![gathered, gen, each, trans, filled, copied, copied_async, pushed, crossed],
    })
}
