use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_core::MarkovStep;
use crate::rng::Stream;

use super::targets::{Target, TargetSet, Tally};

/// States below this are treated as the fixed point itself.
pub const ZERO_FLOOR: f64 = 1e-300;

/// Consecutive unchanged states that count as a floating-point stall.
pub const STALL_WINDOW: u32 = 4096;

pub const DEFAULT_CAP: u64 = 1_000_000_000;

/// Result of one excursion from a state in `A = [c, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    /// `X_n`, or the stalled state when capped.
    pub end: f64,
    pub return_time: u64,
    pub capped: bool,
    /// The orbit reached the zero floor.
    pub hit_zero: bool,
}

/// Runs `X_1, X_2, …` from `x ∈ A` until `X_n ∈ A` or `cap` steps, calling
/// `visit(X_k, multiplicity)` for every state including `X_n`. A stalled orbit
/// is fast-forwarded: its state is credited with all remaining steps up to the
/// cap.
#[inline]
pub fn run_excursion<M, F>(
    map: &M,
    cut: f64,
    x: f64,
    cap: u64,
    rng: &mut Stream,
    mut visit: F,
) -> Result<Outcome>
where
    M: MarkovStep + ?Sized,
    F: FnMut(f64, u64),
{
    let mut y = x;
    let mut n = 0u64;
    let mut same = 0u32;
    loop {
        let mut next = map.step(y, rng)?;
        let mut hit_zero = false;
        if next < ZERO_FLOOR {
            next = 0.0;
            hit_zero = true;
        }
        n += 1;
        if next >= cut {
            visit(next, 1);
            return Ok(Outcome {
                end: next,
                return_time: n,
                capped: false,
                hit_zero: false,
            });
        }
        same = if next == y { same + 1 } else { 0 };
        if hit_zero || same >= STALL_WINDOW || n >= cap {
            visit(next, cap - n + 1);
            return Ok(Outcome {
                end: next,
                return_time: cap,
                capped: true,
                hit_zero,
            });
        }
        visit(next, 1);
        y = next;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excursion {
    pub start: f64,
    pub return_time: u64,
    pub capped: bool,
    /// Visits of `X_1 … X_n` to each target.
    pub counts: Vec<u64>,
    /// `X_1 … X_n` when paths were requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcursionBatch {
    pub cut: f64,
    pub targets: Vec<Target>,
    pub records: Vec<Excursion>,
    pub total_steps: u64,
    pub capped: usize,
    pub zero_hits: usize,
}

impl ExcursionBatch {
    pub fn capped_fraction(&self) -> f64 {
        self.capped as f64 / self.records.len().max(1) as f64
    }

    pub fn return_times(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.return_time).collect()
    }

    /// Fitted `β` in `P(n > k) ∼ k^(−β)`.
    pub fn tail_exponent(&self) -> Option<f64> {
        let mut h = ReturnHistogram::default();
        for r in &self.records {
            h.add(r.return_time);
        }
        h.tail_exponent()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimulationOptions {
    pub cap: Option<u64>,
    pub keep_paths: bool,
    /// Fail when more than this fraction of excursions is capped.
    pub max_capped_fraction: Option<f64>,
}

/// One chain of `n_returns` excursions of the first-return map on
/// `A = [cut, 1]`, started at `x0`. After a capped excursion the chain restarts
/// uniformly in `A`.
pub fn simulate_first_return<M: MarkovStep + ?Sized>(
    map: &M,
    cut: f64,
    x0: f64,
    n_returns: usize,
    targets: &[Target],
    opts: SimulationOptions,
    rng: &mut Stream,
) -> Result<ExcursionBatch> {
    if !(cut..=1.0).contains(&x0) {
        return Err(Error::InvalidSpec {
            field: "x0".into(),
            message: format!("start state {x0} is not in A = [{cut}, 1]"),
        });
    }
    let cap = opts.cap.unwrap_or(DEFAULT_CAP);
    let set = TargetSet::new(targets);
    let mut tally: Tally = set.counter();
    let mut records = Vec::with_capacity(n_returns);
    let (mut total_steps, mut capped, mut zero_hits) = (0u64, 0usize, 0usize);
    let mut x = x0;
    for _ in 0..n_returns {
        tally.clear();
        let mut path = Vec::new();
        let out = run_excursion(map, cut, x, cap, rng, |y, m| {
            set.record(&mut tally, y, m);
            if opts.keep_paths {
                path.push(y);
            }
        })?;
        total_steps += out.return_time;
        capped += out.capped as usize;
        zero_hits += out.hit_zero as usize;
        records.push(Excursion {
            start: x,
            return_time: out.return_time,
            capped: out.capped,
            counts: set.totals(&tally),
            path,
        });
        x = if out.capped { cut + (1.0 - cut) * rng.gen::<f64>() } else { out.end };
    }
    let batch = ExcursionBatch {
        cut,
        targets: targets.to_vec(),
        records,
        total_steps,
        capped,
        zero_hits,
    };
    if let Some(limit) = opts.max_capped_fraction {
        if batch.capped_fraction() > limit {
            return Err(Error::CapExceededFraction {
                fraction: batch.capped_fraction(),
                tail_exponent: batch.tail_exponent(),
            });
        }
    }
    Ok(batch)
}

/// Return times in dyadic buckets `[2^j, 2^(j+1))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnHistogram {
    pub buckets: Vec<u64>,
}

impl Default for ReturnHistogram {
    fn default() -> Self {
        Self { buckets: vec![0; 64] }
    }
}

impl ReturnHistogram {
    #[inline]
    pub fn add(&mut self, n: u64) {
        self.buckets[63 - n.max(1).leading_zeros() as usize] += 1;
    }

    pub fn merge(&mut self, o: &ReturnHistogram) {
        self.buckets.iter_mut().zip(&o.buckets).for_each(|(a, b)| *a += b);
    }

    pub fn total(&self) -> u64 {
        self.buckets.iter().sum()
    }

    /// Log-log slope of the survival function at `k = 2^j`, `j ≥ 3`, over
    /// points with at least 20 exceedances.
    pub fn tail_exponent(&self) -> Option<f64> {
        let n = self.total() as f64;
        let pts: Vec<(f64, f64)> = (3..64)
            .filter_map(|j| {
                let exceed: u64 = self.buckets[j..].iter().sum();
                (exceed >= 20).then(|| ((2f64).powi(j as i32).ln(), (exceed as f64 / n).ln()))
            })
            .collect();
        if pts.len() < 3 {
            return None;
        }
        crate::scaling::ols(&pts).map(|(slope, _)| -slope)
    }
}
