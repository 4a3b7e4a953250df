#![allow(dead_code)]

use ergokit::map_core::{
    Atom, Branch, BranchForm, FamilyInfo, MapFamily, ParameterSpace, RandomMapSpec,
    SelectionDensity,
};

pub fn lin(lo: f64, hi: f64, a: f64, b: f64, closed: bool) -> Branch {
    Branch::new(lo, hi, closed, BranchForm::Linear { a, b })
}

/// `k` full increasing linear branches.
pub fn full_branches(k: usize) -> Vec<Branch> {
    (0..k)
        .map(|i| {
            let lo = i as f64 / k as f64;
            let hi = (i + 1) as f64 / k as f64;
            lin(lo, hi, k as f64, -(i as f64), i + 1 == k)
        })
        .collect()
}

/// Exact arithmetic; orbits collapse after ~53 steps, fine for hand iterates.
pub fn doubling_exact() -> RandomMapSpec {
    RandomMapSpec::deterministic("doubling", full_branches(2), 0.5).unwrap()
}

pub fn doubling() -> RandomMapSpec {
    RandomMapSpec::deterministic("doubling", full_branches(2), 0.5)
        .unwrap()
        .with_dither(true)
}

pub fn identity() -> RandomMapSpec {
    RandomMapSpec::deterministic("identity", vec![lin(0.0, 1.0, 1.0, 0.0, true)], 0.5).unwrap()
}

/// Random map choosing among `maps` with constant probabilities `probs`.
pub fn mixture(maps: Vec<Vec<Branch>>, probs: &[f64], cut: f64) -> RandomMapSpec {
    let atoms = probs
        .iter()
        .enumerate()
        .map(|(i, &w)| Atom {
            t: i as f64,
            s: 0.0,
            weight: w,
        })
        .collect();
    RandomMapSpec::new(
        ParameterSpace::FiniteSet { atoms },
        MapFamily::Custom { maps },
        SelectionDensity::atom_weights(probs.to_vec()),
        cut,
        FamilyInfo::unknown("mixture"),
    )
    .unwrap()
}

/// `{2x mod 1, 3x mod 1}` with probability ½ each.
pub fn two_three() -> RandomMapSpec {
    mixture(vec![full_branches(2), full_branches(3)], &[0.5, 0.5], 0.5).with_dither(true)
}

/// A piecewise-linear random map whose branches are Markov for the uniform
/// partition into `cells` pieces. `maps[m]` lists `(lo, hi, a, b)`.
#[derive(Debug, Clone)]
pub struct MarkovSystem {
    pub cells: usize,
    pub maps: Vec<Vec<(f64, f64, f64, f64)>>,
    pub probs: Vec<f64>,
}

impl MarkovSystem {
    pub fn spec(&self) -> RandomMapSpec {
        let maps = self
            .maps
            .iter()
            .map(|bs| {
                let n = bs.len();
                bs.iter()
                    .enumerate()
                    .map(|(i, &(lo, hi, a, b))| lin(lo, hi, a, b, i + 1 == n))
                    .collect()
            })
            .collect();
        mixture(maps, &self.probs, 0.5)
    }

    /// Invariant density, constant on each cell, from the exact balance
    /// equations of the cell-to-cell mass flow.
    pub fn exact_density(&self) -> Vec<f64> {
        let n = self.cells;
        let w = 1.0 / n as f64;
        let mut q = vec![vec![0.0; n]; n];
        for (m, bs) in self.maps.iter().enumerate() {
            for j in 0..n {
                let mid = (j as f64 + 0.5) * w;
                let &(_, _, a, b) = bs.iter().find(|br| br.0 <= mid && mid < br.1).unwrap();
                let (y0, y1) = (a * j as f64 * w + b, a * (j + 1) as f64 * w + b);
                for (k, qk) in q[j].iter_mut().enumerate() {
                    let ov = (y1.min((k + 1) as f64 * w) - y0.max(k as f64 * w)).max(0.0);
                    *qk += self.probs[m] * ov / (y1 - y0);
                }
            }
        }
        // π (Q − I) = 0 with Σ π = 1
        let mut a = vec![vec![0.0; n + 1]; n];
        for k in 0..n {
            for j in 0..n {
                a[k][j] = q[j][k] - if j == k { 1.0 } else { 0.0 };
            }
        }
        for j in 0..n {
            a[n - 1][j] = 1.0;
        }
        a[n - 1][n] = 1.0;
        let pi = solve(a);
        pi.iter().map(|m| m / w).collect()
    }
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
pub fn solve(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                if f != 0.0 {
                    for k in c..=n {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}

/// Exact Ulam row of a deterministic piecewise-linear map, by interval
/// arithmetic.
pub fn exact_linear_row(branches: &[Branch], n_bins: usize, i: usize) -> Vec<f64> {
    let w = 1.0 / n_bins as f64;
    let (x0, x1) = (i as f64 * w, (i + 1) as f64 * w);
    let mut row = vec![0.0; n_bins];
    for b in branches {
        let (lo, hi) = (x0.max(b.lo), x1.min(b.hi));
        if hi <= lo {
            continue;
        }
        let (y0, y1) = (b.eval(lo), b.eval(hi));
        let (y0, y1) = (y0.min(y1), y0.max(y1));
        for (k, r) in row.iter_mut().enumerate() {
            let ov = (y1.min((k + 1) as f64 * w) - y0.max(k as f64 * w)).max(0.0);
            *r += (hi - lo) / w * ov / (y1 - y0);
        }
    }
    row
}
