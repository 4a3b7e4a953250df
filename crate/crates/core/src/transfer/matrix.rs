//! Ulam matrices.
//!
//! Binary layout (all little-endian):
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 16    | magic `ERGOKIT-ULAM\0\0\0\0`              |
//! | 8     | `n_bins` (u64)                            |
//! | 8     | `samples_per_bin` (u64)                   |
//! | 8     | discarded samples (u64)                   |
//! | 8     | `nnz` (u64)                               |
//! | 16·nnz| triplets `row: u32, col: u32, value: f64`, row-major |

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::map_core::MarkovStep;
use crate::par;
use crate::rng::{Domain, StreamFactory};

use super::grid::{DensityVector, UlamGrid};

pub const MATRIX_MAGIC: &[u8; 16] = b"ERGOKIT-ULAM\0\0\0\0";

/// Discarded fraction above which assembly fails.
pub const MAX_DISCARD_FRACTION: f64 = 0.01;

/// Row-stochastic sparse matrix in CSR form; entry `(i, j)` approximates the
/// probability that a uniform point of bin `i` lands in bin `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub grid: UlamGrid,
    pub samples_per_bin: usize,
    pub discarded: u64,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl TransitionMatrix {
    /// Builds from per-row sparse entries, normalizing every row. An empty
    /// row becomes a self-loop.
    pub fn from_rows(
        grid: UlamGrid,
        samples_per_bin: usize,
        discarded: u64,
        rows: Vec<Vec<(u32, f64)>>,
    ) -> Result<Self> {
        if rows.len() != grid.n_bins {
            return Err(Error::ShapeMismatch {
                expected: grid.n_bins,
                got: rows.len(),
            });
        }
        let mut row_ptr = Vec::with_capacity(grid.n_bins + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(u32, f64)> = Vec::with_capacity(row.len());
            for (j, v) in row {
                if j as usize >= grid.n_bins || !(v >= 0.0) {
                    return Err(Error::AssemblyError(format!("bad entry ({i}, {j}) = {v}")));
                }
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            merged.retain(|e| e.1 > 0.0);
            let total: f64 = merged.iter().map(|e| e.1).sum();
            if total > 0.0 {
                for (j, v) in merged {
                    cols.push(j);
                    vals.push(v / total);
                }
            } else {
                cols.push(i as u32);
                vals.push(1.0);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            grid,
            samples_per_bin,
            discarded,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn identity(grid: UlamGrid) -> Self {
        let rows = (0..grid.n_bins).map(|i| vec![(i as u32, 1.0)]).collect();
        Self::from_rows(grid, 0, 0, rows).expect("identity rows are valid")
    }

    pub fn n_bins(&self) -> usize {
        self.grid.n_bins
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .zip(&self.vals[r])
            .map(|(&j, &v)| (j as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|e| e.1).sum()
    }

    /// Pushes bin masses forward: `out_j = Σ_i in_i · M_ij`.
    pub fn push_masses(&self, masses: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &m) in masses.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                out[j] += m * v;
            }
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MATRIX_MAGIC)?;
        for v in [
            self.grid.n_bins as u64,
            self.samples_per_bin as u64,
            self.discarded,
            self.nnz() as u64,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for i in 0..self.n_bins() {
            for (j, v) in self.row(i) {
                w.write_all(&(i as u32).to_le_bytes())?;
                w.write_all(&(j as u32).to_le_bytes())?;
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 16];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Parse("matrix file too short".into()))?;
        if &magic != MATRIX_MAGIC {
            return Err(Error::Parse("not an ergokit Ulam matrix (bad magic)".into()));
        }
        let mut u64s = [0u64; 4];
        for v in u64s.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)
                .map_err(|_| Error::Parse("truncated matrix header".into()))?;
            *v = u64::from_le_bytes(b);
        }
        let [n_bins, spb, discarded, nnz] = u64s;
        let grid = UlamGrid::new(n_bins as usize)?;
        let mut rows = vec![Vec::new(); grid.n_bins];
        let mut b = [0u8; 16];
        for _ in 0..nnz {
            r.read_exact(&mut b)
                .map_err(|_| Error::Parse("truncated matrix body".into()))?;
            let i = u32::from_le_bytes(b[0..4].try_into().unwrap()) as usize;
            let j = u32::from_le_bytes(b[4..8].try_into().unwrap());
            let v = f64::from_le_bytes(b[8..16].try_into().unwrap());
            rows.get_mut(i)
                .ok_or_else(|| Error::Parse(format!("row {i} out of range")))?
                .push((j, v));
        }
        Self::from_rows(grid, spb as usize, discarded, rows)
    }
}

/// Monte Carlo Ulam assembly. Row `i` uses `samples_per_bin` stratified
/// points of bin `i` (one per equal sub-cell, jittered) and its own random
/// stream, so the matrix depends only on the seed. Maps whose step law is
/// finitely supported at a point contribute that law exactly instead of a
/// single sampled image.
pub fn build_ulam<M: MarkovStep + ?Sized>(
    map: &M,
    n_bins: usize,
    samples_per_bin: usize,
    streams: &StreamFactory,
) -> Result<TransitionMatrix> {
    let grid = UlamGrid::new(n_bins)?;
    if samples_per_bin < 100 {
        return Err(Error::InvalidSpec {
            field: "samples_per_bin".into(),
            message: format!("need at least 100, got {samples_per_bin}"),
        });
    }
    let k = samples_per_bin as f64;
    let results = par::map_indexed(n_bins, |i| {
        let mut rng = streams.substream(Domain::Ulam, i as u64);
        let lo = grid.left(i);
        let w = grid.width();
        let mut hits: Vec<(u32, f64)> = Vec::with_capacity(samples_per_bin);
        let mut discarded = 0u64;
        for s in 0..samples_per_bin {
            let u: f64 = rand::Rng::gen(&mut rng);
            let x = lo + w * (s as f64 + u) / k;
            // a finitely supported step law is tallied exactly
            let law = match map.outcomes(x) {
                Some(r) => r,
                None => map.step(x, &mut rng).map(|y| vec![(1.0, y)]),
            };
            match law {
                Ok(law) if law.iter().all(|o| o.1.is_finite()) => {
                    hits.extend(law.into_iter().map(|(p, y)| (grid.bin_of(y) as u32, p)))
                }
                Ok(_) | Err(Error::NoBranch { .. }) => discarded += 1,
                Err(e) => return Err(e),
            }
        }
        hits.sort_unstable_by_key(|h| h.0);
        let mut row: Vec<(u32, f64)> = Vec::new();
        for (j, p) in hits {
            match row.last_mut() {
                Some(last) if last.0 == j => last.1 += p,
                _ => row.push((j, p)),
            }
        }
        Ok((row, discarded))
    });
    let mut rows = Vec::with_capacity(n_bins);
    let mut discarded = 0u64;
    for r in results {
        let (row, d) = r?;
        discarded += d;
        rows.push(row);
    }
    let frac = discarded as f64 / (n_bins as f64 * k);
    if frac > MAX_DISCARD_FRACTION {
        return Err(Error::AssemblyError(format!(
            "{:.2}% of samples had no branch (limit {:.0}%)",
            100.0 * frac,
            100.0 * MAX_DISCARD_FRACTION
        )));
    }
    TransitionMatrix::from_rows(grid, samples_per_bin, discarded, rows)
}

/// One application of the discretized transfer operator.
pub fn apply_pf(matrix: &TransitionMatrix, density: &DensityVector) -> Result<DensityVector> {
    if density.grid != matrix.grid {
        return Err(Error::ShapeMismatch {
            expected: matrix.n_bins(),
            got: density.grid.n_bins,
        });
    }
    let mut out = vec![0.0; matrix.n_bins()];
    matrix.push_masses(&density.values, &mut out);
    Ok(DensityVector {
        grid: matrix.grid,
        values: out,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryResult {
    pub density: DensityVector,
    /// Final `‖Mh − h‖₁`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Per-iteration growth of the mass in the first bin over the final
    /// stretch; large values indicate mass escaping into the fixed point.
    pub mass_drain_rate: f64,
}

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Power iteration from the uniform density.
pub fn stationary_density(
    matrix: &TransitionMatrix,
    tol: f64,
    max_iter: usize,
) -> StationaryResult {
    stationary_density_from(matrix, DensityVector::uniform(matrix.grid), tol, max_iter)
}

pub fn stationary_density_from(
    matrix: &TransitionMatrix,
    start: DensityVector,
    tol: f64,
    max_iter: usize,
) -> StationaryResult {
    const DRAIN_WINDOW: usize = 100;
    let n = matrix.n_bins();
    let w = matrix.grid.width();
    let mut h = start.normalized().values;
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut first_bin = Vec::with_capacity(DRAIN_WINDOW + 1);
    while iterations < max_iter {
        matrix.push_masses(&h, &mut next);
        iterations += 1;
        let mass: f64 = next.iter().sum::<f64>() * w;
        if mass > 0.0 {
            next.iter_mut().for_each(|v| *v /= mass);
        }
        residual = h.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum::<f64>() * w;
        std::mem::swap(&mut h, &mut next);
        if first_bin.len() > DRAIN_WINDOW {
            first_bin.remove(0);
        }
        first_bin.push(h[0] * w);
        if residual < tol {
            break;
        }
    }
    let mass_drain_rate = match (first_bin.first(), first_bin.last()) {
        (Some(a), Some(b)) if first_bin.len() > 1 => (b - a) / (first_bin.len() - 1) as f64,
        _ => 0.0,
    };
    StationaryResult {
        density: DensityVector {
            grid: matrix.grid,
            values: h,
        },
        converged: residual < tol,
        residual,
        iterations,
        mass_drain_rate,
    }
}
