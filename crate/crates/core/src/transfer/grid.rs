use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of `[0,1]` into `n_bins` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UlamGrid {
    pub n_bins: usize,
}

impl UlamGrid {
    pub fn new(n_bins: usize) -> Result<Self> {
        if n_bins < 2 || n_bins > u32::MAX as usize {
            return Err(Error::InvalidSpec {
                field: "bins".into(),
                message: format!("need 2 <= bins < 2^32, got {n_bins}"),
            });
        }
        Ok(Self { n_bins })
    }

    #[inline]
    pub fn width(&self) -> f64 {
        1.0 / self.n_bins as f64
    }

    #[inline]
    pub fn left(&self, i: usize) -> f64 {
        i as f64 / self.n_bins as f64
    }

    #[inline]
    pub fn right(&self, i: usize) -> f64 {
        (i + 1) as f64 / self.n_bins as f64
    }

    /// Bin containing `x`; `1.0` goes to the last bin.
    #[inline]
    pub fn bin_of(&self, x: f64) -> usize {
        let k = (x * self.n_bins as f64).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.n_bins - 1)
        }
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.n_bins).map(|i| self.left(i)).collect()
    }

    /// Bins whose interior meets `(lo, hi)`; a degenerate interval selects
    /// the bin containing it.
    pub fn bins_meeting(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        if hi <= lo {
            let b = self.bin_of(lo);
            return b..b + 1;
        }
        let first = self.bin_of(lo);
        let mut last = self.bin_of(hi);
        if self.left(last) >= hi && last > first {
            last -= 1;
        }
        first..last + 1
    }
}

/// Piecewise-constant density on an [`UlamGrid`] (values in units of 1/length).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityVector {
    pub grid: UlamGrid,
    pub values: Vec<f64>,
}

impl DensityVector {
    pub fn uniform(grid: UlamGrid) -> Self {
        Self {
            grid,
            values: vec![1.0; grid.n_bins],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let grid = UlamGrid::new(values.len())?;
        Ok(Self { grid, values })
    }

    /// `∫ h = Σ values · width`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.width()
    }

    /// Mass of `[lo, hi]`, counting partial bins proportionally.
    pub fn mass_of(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        self.grid
            .bins_meeting(lo, hi)
            .map(|i| {
                let overlap = hi.min(self.grid.right(i)) - lo.max(self.grid.left(i));
                self.values[i] * overlap.max(0.0)
            })
            .sum()
    }

    pub fn normalized(mut self) -> Self {
        let m = self.mass();
        if m > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= m);
        }
        self
    }

    /// Rescales so that `∫_lo^hi h = 1`.
    pub fn normalized_on(mut self, lo: f64, hi: f64) -> Self {
        let m = self.mass_of(lo, hi);
        if m > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= m);
        }
        self
    }

    pub fn l1_distance(&self, other: &DensityVector) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch {
                expected: self.grid.n_bins,
                got: other.grid.n_bins,
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.grid.width())
    }

    pub fn sup_distance_to(&self, c: f64) -> f64 {
        self.values.iter().map(|v| (v - c).abs()).fold(0.0, f64::max)
    }

    /// Coarsens by summing groups of `factor` bins.
    pub fn coarsen(&self, factor: usize) -> Result<DensityVector> {
        if factor == 0 || self.grid.n_bins % factor != 0 {
            return Err(Error::ShapeMismatch {
                expected: self.grid.n_bins,
                got: factor,
            });
        }
        let values = self
            .values
            .chunks(factor)
            .map(|c| c.iter().sum::<f64>() / factor as f64)
            .collect();
        DensityVector::from_values(values)
    }

    /// CSV with header `bin_left,bin_right,density`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_left,bin_right,density")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{},{}", self.grid.left(i), self.grid.right(i), v)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut values = Vec::new();
        let mut header = false;
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            if !header {
                if line.trim() != "bin_left,bin_right,density" {
                    return Err(Error::Parse(format!("unexpected density header `{line}`")));
                }
                header = true;
                continue;
            }
            let v = line
                .split(',')
                .nth(2)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("line {}: bad density row", n + 1)))?;
            values.push(v);
        }
        DensityVector::from_values(values)
    }
}
