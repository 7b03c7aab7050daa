//! Seeded Monte-Carlo detection records.
//!
//! Draws are split into fixed-size shards; shard `i` uses the ChaCha stream
//! `i` of the run seed, so results do not depend on the thread count.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::binning::{BinnedJoint, DetectorGrid};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::states::{Basis, GaussianMixtureState, MarginalComponent};

pub const SHARD_SIZE: u64 = 1 << 16;
/// Shards generated concurrently when events are streamed to a sink.
const WAVE: u64 = 64;

/// One detection attempt by both parties; `None` marks an outcome outside
/// the detector range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord<T> {
    pub basis: Basis,
    pub value_a: Option<T>,
    pub value_b: Option<T>,
}

struct Draw<T> {
    cumulative: Vec<T>,
    factors: Vec<([T; 2], [T; 3])>,
}

impl<T: Real> Draw<T> {
    fn new(marginal: &[MarginalComponent<T>]) -> Self {
        let mut acc = T::zero();
        let cumulative = marginal
            .iter()
            .map(|c| {
                acc = acc + c.weight;
                acc
            })
            .collect();
        // Lower Cholesky factor [[l00, 0], [l10, l11]].
        let factors = marginal
            .iter()
            .map(|c| {
                let l00 = c.cov[0][0].sqrt();
                let l10 = c.cov[0][1] / l00;
                let l11 = (c.cov[1][1] - l10 * l10).max(T::zero()).sqrt();
                (c.mean, [l00, l10, l11])
            })
            .collect();
        Self { cumulative, factors }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> (T, T)
    where
        StandardNormal: Distribution<T>,
    {
        let u: T = T::lit(rng.random::<f64>()) * *self.cumulative.last().expect("nonempty");
        let idx = self.cumulative.iter().position(|&c| u < c).unwrap_or(self.cumulative.len() - 1);
        let (mean, [l00, l10, l11]) = self.factors[idx];
        let z0: T = StandardNormal.sample(rng);
        let z1: T = StandardNormal.sample(rng);
        (mean[0] + l00 * z0, mean[1] + l10 * z0 + l11 * z1)
    }
}

fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

fn shard_len(n: u64, shard: u64) -> u64 {
    SHARD_SIZE.min(n - shard * SHARD_SIZE)
}

fn shard_count(n: u64) -> u64 {
    n.div_ceil(SHARD_SIZE)
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        Err(Error::domain("sample size must be at least 1"))
    } else {
        Ok(())
    }
}

fn shard_events<T: Real>(
    draw: &Draw<T>,
    basis: Basis,
    grid_a: &DetectorGrid<T>,
    grid_b: &DetectorGrid<T>,
    seed: u64,
    shard: u64,
    len: u64,
) -> Vec<EventRecord<T>>
where
    StandardNormal: Distribution<T>,
{
    let mut rng = shard_rng(seed, shard);
    let (ra, rb) = (grid_a.range(), grid_b.range());
    (0..len)
        .map(|_| {
            let (a, b) = draw.sample(&mut rng);
            EventRecord {
                basis,
                value_a: ra.contains(a).then_some(a),
                value_b: rb.contains(b).then_some(b),
            }
        })
        .collect()
}

/// Streams `n` events to `sink` in deterministic order.
pub fn for_each_event<T: Real, F: FnMut(&EventRecord<T>) -> Result<()>>(
    state: &GaussianMixtureState<T>,
    basis: Basis,
    n: u64,
    grid_a: &DetectorGrid<T>,
    grid_b: &DetectorGrid<T>,
    seed: u64,
    mut sink: F,
) -> Result<()>
where
    StandardNormal: Distribution<T>,
{
    check_n(n)?;
    let draw = Draw::new(&state.marginal(basis));
    let shards = shard_count(n);
    let mut start = 0;
    while start < shards {
        let end = (start + WAVE).min(shards);
        let wave: Vec<Vec<EventRecord<T>>> = (start..end)
            .into_par_iter()
            .map(|s| shard_events(&draw, basis, grid_a, grid_b, seed, s, shard_len(n, s)))
            .collect();
        for ev in wave.iter().flatten() {
            sink(ev)?;
        }
        start = end;
    }
    Ok(())
}

pub fn sample_events<T: Real>(
    state: &GaussianMixtureState<T>,
    basis: Basis,
    n: u64,
    grid_a: &DetectorGrid<T>,
    grid_b: &DetectorGrid<T>,
    seed: u64,
) -> Result<Vec<EventRecord<T>>>
where
    StandardNormal: Distribution<T>,
{
    let mut out = Vec::with_capacity(n.min(1 << 24) as usize);
    for_each_event(state, basis, n, grid_a, grid_b, seed, |e| {
        out.push(*e);
        Ok(())
    })?;
    Ok(out)
}

/// Bin counts of both-detected events; an event missed by either party
/// lands in no bin.
fn count_into<T: Real>(
    counts: &mut [u64],
    ev: &EventRecord<T>,
    grid_a: &DetectorGrid<T>,
    grid_b: &DetectorGrid<T>,
) {
    if let (Some(a), Some(b)) = (ev.value_a, ev.value_b) {
        if let (Some(k), Some(l)) = (grid_a.locate(a), grid_b.locate(b)) {
            counts[k * grid_b.bins() + l] += 1;
        }
    }
}

pub fn empirical_joint<T: Real>(
    events: &[EventRecord<T>],
    grid_a: &DetectorGrid<T>,
    grid_b: &DetectorGrid<T>,
) -> Result<BinnedJoint<T>> {
    let first = events
        .first()
        .ok_or_else(|| Error::Degenerate("no events to bin".into()))?;
    if events.iter().any(|e| e.basis != first.basis) {
        return Err(Error::contract("events mix measurement bases"));
    }
    let mut counts = vec![0u64; grid_a.bins() * grid_b.bins()];
    for ev in events {
        count_into(&mut counts, ev, grid_a, grid_b);
    }
    BinnedJoint::from_counts(grid_a.bins(), grid_b.bins(), &counts, events.len() as u64)
}

/// Same result as `empirical_joint(&sample_events(..))` without holding the
/// events in memory.
pub fn sample_joint<T: Real>(
    state: &GaussianMixtureState<T>,
    basis: Basis,
    n: u64,
    grid_a: &DetectorGrid<T>,
    grid_b: &DetectorGrid<T>,
    seed: u64,
) -> Result<BinnedJoint<T>>
where
    StandardNormal: Distribution<T>,
{
    check_n(n)?;
    let draw = Draw::new(&state.marginal(basis));
    let cells = grid_a.bins() * grid_b.bins();
    let per_shard: Vec<Vec<u64>> = (0..shard_count(n))
        .into_par_iter()
        .map(|s| {
            let mut counts = vec![0u64; cells];
            for ev in shard_events(&draw, basis, grid_a, grid_b, seed, s, shard_len(n, s)) {
                count_into(&mut counts, &ev, grid_a, grid_b);
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; cells];
    for shard in per_shard {
        for (c, s) in counts.iter_mut().zip(shard) {
            *c += s;
        }
    }
    BinnedJoint::from_counts(grid_a.bins(), grid_b.bins(), &counts, n)
}

pub const MISS: &str = "MISS";

/// CSV event dump with columns `basis,value_a,value_b`.
pub struct EventCsvWriter<W: Write> {
    out: W,
}

impl<W: Write> EventCsvWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "basis,value_a,value_b")?;
        Ok(Self { out })
    }

    pub fn write<T: Real>(&mut self, ev: &EventRecord<T>) -> Result<()> {
        let basis = match ev.basis {
            Basis::X => "X",
            Basis::P => "P",
        };
        let cell = |v: Option<T>| v.map_or_else(|| MISS.to_string(), |x| format!("{x}"));
        writeln!(self.out, "{basis},{},{}", cell(ev.value_a), cell(ev.value_b))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}
