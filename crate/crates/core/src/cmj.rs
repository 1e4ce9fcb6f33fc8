//! Event-driven simulation of the whole pure-birth CMJ population.
//!
//! The queue holds exactly one pending event per individual: its next birth.
//! Popping the global minimum creates an individual, reschedules the parent
//! for its following child and schedules the newborn's first child.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::purebirth::{holding_time, Stop};
use crate::rates::RateSequence;
use crate::rng::CounterRng;

/// Parent marker stored for the ancestor.
pub const ROOT: u32 = u32::MAX;

/// Default population cap.
pub const DEFAULT_POPULATION_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Count stop reached.
    Completed,
    /// Next birth falls after the horizon.
    HorizonReached,
    /// Population cap hit before the stop rule: explosion suspected.
    CapExceeded,
    /// Count stop not reached before the auxiliary time limit.
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genealogy {
    /// `parent[n] < n` for `n >= 1`; `parent[0] == ROOT`.
    pub parent: Vec<u32>,
    /// `τ_n`, non-decreasing with `τ_0 = 0`.
    pub birth_time: Vec<f64>,
    pub out_degree: Vec<u32>,
    pub outcome: Outcome,
    /// Holding times that flushed to zero.
    pub underflows: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub cap: usize,
    /// Extra time bound for count-mode runs.
    pub time_limit: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { cap: DEFAULT_POPULATION_CAP, time_limit: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirthEvent {
    pub time: f64,
    pub parent_id: u32,
    /// The newborn will be the parent's `child_rank`-th child.
    pub child_rank: u32,
}

impl Eq for BirthEvent {}

impl Ord for BirthEvent {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.parent_id.cmp(&self.parent_id))
            .then_with(|| other.child_rank.cmp(&self.child_rank))
    }
}

impl PartialOrd for BirthEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Genealogy {
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Checks the recursive-tree, time-order and degree invariants.
    pub fn check_invariants(&self) -> core::result::Result<(), &'static str> {
        let n = self.parent.len();
        if n == 0 || self.parent[0] != ROOT || self.birth_time[0] != 0.0 {
            return Err("missing root");
        }
        if self.birth_time.len() != n || self.out_degree.len() != n {
            return Err("column lengths differ");
        }
        if self.birth_time.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err("birth times decrease");
        }
        let mut deg = alloc::vec![0u32; n];
        for (id, &p) in self.parent.iter().enumerate().skip(1) {
            if p as usize >= id {
                return Err("parent index not smaller than child index");
            }
            deg[p as usize] += 1;
        }
        if deg != self.out_degree {
            return Err("out-degrees disagree with parent array");
        }
        Ok(())
    }
}

fn draw(seq: &RateSequence, rng: &CounterRng, id: u32, rank: u32, underflows: &mut u64) -> Result<f64> {
    let e = holding_time(seq.rate_log2(rank as u64)?.get(), rng.exp1(id as u64, rank as u64 - 1));
    if e == 0.0 {
        *underflows += 1;
    }
    Ok(e)
}

/// Simulates one population. Individual `j` draws the holding time before
/// its `e`-th child from cell `(lane j, counter e - 1)` of `rng`.
pub fn simulate(seq: &RateSequence, stop: Stop, opts: &SimOptions, rng: &CounterRng) -> Result<Genealogy> {
    let (target, horizon) = match stop {
        Stop::Count(0) => return Err(Error::InvalidParameter("count stop needs N >= 1".into())),
        Stop::Count(n) => (n, f64::INFINITY),
        Stop::Horizon(t) if !(t > 0.0) => {
            return Err(Error::InvalidParameter("horizon must be positive".into()))
        }
        Stop::Horizon(t) => (u64::MAX, t),
    };
    if opts.cap == 0 || opts.cap as u64 > u32::MAX as u64 {
        return Err(Error::InvalidParameter("population cap must lie in 1..=u32::MAX".into()));
    }
    if target != u64::MAX && target > opts.cap as u64 {
        return Err(Error::InvalidParameter("count stop exceeds the population cap".into()));
    }
    let limit = opts.time_limit.unwrap_or(f64::INFINITY);

    let mut g = Genealogy {
        parent: alloc::vec![ROOT],
        birth_time: alloc::vec![0.0],
        out_degree: alloc::vec![0],
        outcome: Outcome::Completed,
        underflows: 0,
    };
    let mut queue = BinaryHeap::new();
    let first = draw(seq, rng, 0, 1, &mut g.underflows)?;
    queue.push(BirthEvent { time: first, parent_id: 0, child_rank: 1 });

    loop {
        if g.len() as u64 >= target {
            g.outcome = Outcome::Completed;
            break;
        }
        let ev = queue.pop().expect("one pending event per individual");
        if ev.time > horizon {
            g.outcome = Outcome::HorizonReached;
            break;
        }
        if ev.time > limit {
            g.outcome = Outcome::TimeLimit;
            break;
        }
        if g.len() >= opts.cap {
            g.outcome = Outcome::CapExceeded;
            break;
        }
        let id = g.len() as u32;
        g.parent.push(ev.parent_id);
        g.birth_time.push(ev.time);
        g.out_degree.push(0);
        g.out_degree[ev.parent_id as usize] += 1;

        let rank = ev.child_rank + 1;
        let next = ev.time + draw(seq, rng, ev.parent_id, rank, &mut g.underflows)?;
        queue.push(BirthEvent { time: next, parent_id: ev.parent_id, child_rank: rank });
        let first = ev.time + draw(seq, rng, id, 1, &mut g.underflows)?;
        queue.push(BirthEvent { time: first, parent_id: id, child_rank: 1 });
    }
    Ok(g)
}

/// `(n, τ_n)` for every individual.
pub fn tau_trajectory(g: &Genealogy) -> Vec<(u64, f64)> {
    g.birth_time.iter().enumerate().map(|(n, &t)| (n as u64, t)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub horizon: f64,
    /// Estimate of `P{τ_N <= horizon}`.
    pub probability: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTable {
    pub population: u64,
    pub replicates: u64,
    pub rows: Vec<ProbeRow>,
    /// Fraction of replicates whose population reached `N` before the
    /// largest horizon.
    pub cap_fraction: f64,
}

/// `τ_N` for one replicate, or `None` when it exceeds `t_max`.
pub fn probe_replicate(seq: &RateSequence, n: u64, t_max: f64, stream: &CounterRng) -> Result<Option<f64>> {
    let opts = SimOptions { cap: (n as usize).max(1), time_limit: Some(t_max) };
    let g = simulate(seq, Stop::Count(n), &opts, stream)?;
    Ok(match g.outcome {
        Outcome::Completed => g.birth_time.last().copied(),
        _ => None,
    })
}

impl ProbeTable {
    /// `taus` are the per-replicate `τ_N` values in replicate order.
    pub fn from_taus(population: u64, horizons: &[f64], taus: &[Option<f64>]) -> Self {
        let reps = taus.len() as f64;
        let rows = horizons
            .iter()
            .map(|&h| {
                let hits = taus.iter().filter(|t| matches!(t, Some(x) if *x <= h)).count() as f64;
                let p = hits / reps;
                ProbeRow { horizon: h, probability: p, std_error: libm::sqrt(p * (1.0 - p) / reps) }
            })
            .collect();
        Self {
            population,
            replicates: taus.len() as u64,
            rows,
            cap_fraction: taus.iter().filter(|t| t.is_some()).count() as f64 / reps,
        }
    }
}

pub fn validate_probe(n: u64, horizons: &[f64], reps: u64) -> Result<()> {
    if n == 0 || n > u32::MAX as u64 {
        return Err(Error::InvalidParameter("probe population must lie in 1..=u32::MAX".into()));
    }
    if reps < 100 {
        return Err(Error::InvalidParameter("explosion probe needs at least 100 replicates".into()));
    }
    if horizons.is_empty() || horizons.iter().any(|h| !(*h >= 0.0) || h.is_infinite()) {
        return Err(Error::InvalidParameter("probe horizons must be finite and non-negative".into()));
    }
    Ok(())
}

/// Monte Carlo table of `P{τ_N <= T}` over `horizons`; replicate `r` uses
/// `rng.stream(r)`.
pub fn explosion_probe(
    seq: &RateSequence,
    n: u64,
    horizons: &[f64],
    reps: u64,
    rng: &CounterRng,
) -> Result<ProbeTable> {
    validate_probe(n, horizons, reps)?;
    let t_max = horizons.iter().copied().fold(0.0, f64::max);
    let taus = (0..reps)
        .map(|r| probe_replicate(seq, n, t_max, &rng.stream(r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbeTable::from_taus(n, horizons, &taus))
}
