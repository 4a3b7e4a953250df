//! Measure profiles `ε ↦ μ̂([0, ε])` and the ε-grid mini-grammar.
//!
//! Grid descriptors:
//!
//! * `A..B:geometric` – geometric from `A` to `B` with ratio `2^(-1/2)`;
//! * `A..B:geometric:R` – the same with ratio `R` (or `1/R` if `R > 1`);
//! * `x1,x2,…` – an explicit list.
//!
//! Numbers may be written as decimals (`0.01`, `1e-3`) or powers (`2^-4`).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::first_return::SigmaFiniteEstimate;

pub const PROFILE_SCHEMA: &str = "ergokit-profile/1";
pub const DEFAULT_GRID: &str = "2^-4..2^-16:geometric";

pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Parse(format!("bad number `{s}`"));
    if let Some((b, e)) = s.split_once('^') {
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        let e: f64 = e.trim().parse().map_err(|_| bad())?;
        return Ok(b.powf(e));
    }
    s.parse().map_err(|_| bad())
}

/// Expands a grid descriptor into values in decreasing order for geometric
/// grids, as written for lists.
pub fn parse_eps_grid(desc: &str) -> Result<Vec<f64>> {
    let desc = desc.trim();
    let grid = if let Some((range, rest)) = desc.split_once(':') {
        let (a, b) = range
            .split_once("..")
            .ok_or_else(|| Error::Parse(format!("expected `A..B` in `{desc}`")))?;
        let (a, b) = (parse_number(a)?, parse_number(b)?);
        let mut parts = rest.split(':');
        match parts.next() {
            Some("geometric") => {}
            other => return Err(Error::Parse(format!("unknown grid kind {other:?}"))),
        }
        let mut r = match parts.next() {
            Some(r) => parse_number(r)?,
            None => 0.5f64.sqrt(),
        };
        if parts.next().is_some() {
            return Err(Error::Parse(format!("trailing fields in `{desc}`")));
        }
        if !(r > 0.0) || r == 1.0 || !(a > 0.0) || !(b > 0.0) {
            return Err(Error::Parse(format!("degenerate geometric grid `{desc}`")));
        }
        if (b < a) != (r < 1.0) {
            r = 1.0 / r;
        }
        let steps = ((b / a).ln() / r.ln() + 1e-9).floor() as usize;
        let mut lr = r.log2();
        if (lr * 64.0 - (lr * 64.0).round()).abs() < 1e-9 {
            lr = (lr * 64.0).round() / 64.0;
        }
        (0..=steps).map(|k| a * (k as f64 * lr).exp2()).collect::<Vec<f64>>()
    } else {
        desc.split(',').map(parse_number).collect::<Result<Vec<f64>>>()?
    };
    if grid.is_empty() || grid.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::Parse(format!("grid `{desc}` must be positive and non-empty")));
    }
    Ok(grid)
}

/// Decades spanned by a grid.
pub fn decades(eps: &[f64]) -> f64 {
    let lo = eps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eps.iter().copied().fold(0.0, f64::max);
    (hi / lo).log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureProfile {
    pub eps: Vec<f64>,
    pub mu_hat: Vec<f64>,
    pub stderr: Vec<f64>,
    pub capped_fraction: f64,
    /// Estimate from the first half of the excursion segments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_hat_half: Option<Vec<f64>>,
    /// Per-segment means, available when the profile came from a run
    /// rather than a file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_means: Option<Vec<Vec<f64>>>,
}

impl MeasureProfile {
    pub fn from_estimate(eps: &[f64], est: &SigmaFiniteEstimate) -> Self {
        Self {
            eps: eps.to_vec(),
            mu_hat: est.mu_hat[..eps.len()].to_vec(),
            stderr: est.stderr[..eps.len()].to_vec(),
            capped_fraction: est.capped_fraction,
            mu_hat_half: Some(est.mu_hat_half[..eps.len()].to_vec()),
            segment_means: Some(
                est.segment_means
                    .iter()
                    .map(|m| m[..eps.len()].to_vec())
                    .collect(),
            ),
        }
    }

    /// Noiseless profile `μ(ε) = f(ε)`.
    pub fn synthetic(eps: &[f64], f: impl Fn(f64) -> f64) -> Self {
        Self {
            eps: eps.to_vec(),
            mu_hat: eps.iter().map(|&e| f(e)).collect(),
            stderr: vec![0.0; eps.len()],
            capped_fraction: 0.0,
            mu_hat_half: None,
            segment_means: None,
        }
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    /// Header comments carry the provenance; the table follows.
    pub fn write_csv<W: Write>(&self, mut w: W, provenance: &[(&str, String)]) -> Result<()> {
        write!(w, "# schema={PROFILE_SCHEMA}")?;
        for (k, v) in provenance {
            write!(w, " {k}={v}")?;
        }
        writeln!(w)?;
        let half = self.mu_hat_half.as_ref();
        if half.is_some() {
            writeln!(w, "eps,mu_hat,stderr,capped_fraction,mu_hat_half")?;
        } else {
            writeln!(w, "eps,mu_hat,stderr,capped_fraction")?;
        }
        for i in 0..self.len() {
            write!(
                w,
                "{},{},{},{}",
                self.eps[i], self.mu_hat[i], self.stderr[i], self.capped_fraction
            )?;
            if let Some(h) = half {
                write!(w, ",{}", h[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut header: Option<Vec<String>> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if header.is_none() {
                header = Some(line.split(',').map(|s| s.trim().to_string()).collect());
                continue;
            }
            let vals = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
            rows.push(vals);
        }
        let header = header.ok_or_else(|| Error::Parse("empty profile".into()))?;
        let col = |name: &str| header.iter().position(|h| h == name);
        let need = |name: &str| col(name).ok_or_else(|| Error::Parse(format!("missing column `{name}`")));
        let (ie, im, is) = (need("eps")?, need("mu_hat")?, need("stderr")?);
        let ic = col("capped_fraction");
        let ih = col("mu_hat_half");
        let get = |row: &Vec<f64>, i: usize| -> Result<f64> {
            row.get(i)
                .copied()
                .ok_or_else(|| Error::Parse("short profile row".into()))
        };
        let mut p = MeasureProfile {
            eps: vec![],
            mu_hat: vec![],
            stderr: vec![],
            capped_fraction: 0.0,
            mu_hat_half: ih.map(|_| vec![]),
            segment_means: None,
        };
        for row in &rows {
            p.eps.push(get(row, ie)?);
            p.mu_hat.push(get(row, im)?);
            p.stderr.push(get(row, is)?);
            if let Some(i) = ic {
                p.capped_fraction = p.capped_fraction.max(get(row, i)?);
            }
            if let (Some(i), Some(h)) = (ih, p.mu_hat_half.as_mut()) {
                h.push(get(row, i)?);
            }
        }
        Ok(p)
    }
}
