use serde::{Deserialize, Serialize};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub lo: f64,
    pub hi: f64,
}

impl Target {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// `[0, eps]`.
    pub fn below(eps: f64) -> Self {
        Self { lo: 0.0, hi: eps }
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

pub fn eps_targets(eps: &[f64]) -> Vec<Target> {
    eps.iter().map(|&e| Target::below(e)).collect()
}

/// Occupation tallies. Targets of the form `[0, ε]` share one sorted bucket
/// array (one binary search per state, prefix sums at the end); others are
/// checked one by one.
#[derive(Debug, Clone)]
pub struct TargetSet {
    targets: Vec<Target>,
    /// Sorted distinct `ε` of the nested targets.
    nested: Vec<f64>,
    nested_max: f64,
    /// Original index → bucket index for nested targets.
    nested_slot: Vec<Option<usize>>,
    generic: Vec<usize>,
}

impl TargetSet {
    pub fn new(targets: &[Target]) -> Self {
        let mut nested: Vec<f64> = targets
            .iter()
            .filter(|t| t.lo <= 0.0 && t.hi >= 0.0)
            .map(|t| t.hi)
            .collect();
        nested.sort_by(f64::total_cmp);
        nested.dedup();
        let nested_slot = targets
            .iter()
            .map(|t| {
                (t.lo <= 0.0 && t.hi >= 0.0)
                    .then(|| nested.partition_point(|&e| e < t.hi))
            })
            .collect::<Vec<_>>();
        let generic = (0..targets.len()).filter(|&i| nested_slot[i].is_none()).collect();
        Self {
            targets: targets.to_vec(),
            nested_max: nested.last().copied().unwrap_or(f64::NEG_INFINITY),
            nested,
            nested_slot,
            generic,
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn counter(&self) -> Tally {
        Tally {
            buckets: vec![0; self.nested.len()],
            generic: vec![0; self.generic.len()],
        }
    }

    /// Adds `mult` visits of state `y`.
    #[inline]
    pub fn record(&self, tally: &mut Tally, y: f64, mult: u64) {
        if y <= self.nested_max {
            let k = self.nested.partition_point(|&e| e < y);
            tally.buckets[k] += mult;
        }
        for (slot, &i) in self.generic.iter().enumerate() {
            if self.targets[i].contains(y) {
                tally.generic[slot] += mult;
            }
        }
    }

    /// Per-target visit totals in the original order.
    pub fn totals(&self, tally: &Tally) -> Vec<u64> {
        let mut cum = vec![0u64; self.nested.len()];
        let mut run = 0u64;
        for (k, c) in tally.buckets.iter().enumerate() {
            run += c;
            cum[k] = run;
        }
        let mut out = vec![0u64; self.targets.len()];
        for (i, slot) in self.nested_slot.iter().enumerate() {
            if let Some(k) = slot {
                out[i] = cum[*k];
            }
        }
        for (slot, &i) in self.generic.iter().enumerate() {
            out[i] = tally.generic[slot];
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    buckets: Vec<u64>,
    generic: Vec<u64>,
}

impl Tally {
    pub fn merge(&mut self, other: &Tally) {
        self.buckets.iter_mut().zip(&other.buckets).for_each(|(a, b)| *a += b);
        self.generic.iter_mut().zip(&other.generic).for_each(|(a, b)| *a += b);
    }

    pub fn clear(&mut self) {
        self.buckets.iter_mut().for_each(|v| *v = 0);
        self.generic.iter_mut().for_each(|v| *v = 0);
    }
}
