use crate::error::{Error, Result};
use crate::map_core::{ParamPoint, RandomMapSpec};
use crate::rng::{Domain, StreamFactory};

use super::grid::DensityVector;

/// Parameters sampled when the parameter space is not finite.
pub const PULLBACK_SAMPLES: usize = 256;

/// `(min, max)` of `h` over bins meeting the union of `region`.
pub fn density_bounds_on(density: &DensityVector, region: &[(f64, f64)]) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(a, b) in region {
        let (a, b) = (a.max(0.0), b.min(1.0));
        if b < a {
            continue;
        }
        for i in density.grid.bins_meeting(a, b) {
            lo = lo.min(density.values[i]);
            hi = hi.max(density.values[i]);
        }
    }
    if lo > hi {
        return Err(Error::EmptyRegion);
    }
    Ok((lo, hi))
}

/// Sorted, merged union of intervals.
pub fn merge_intervals(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.retain(|(a, b)| b >= a);
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// The parameters used for set-valued sampling: all atoms of a finite space,
/// otherwise [`PULLBACK_SAMPLES`] draws from `p(·, x)`.
pub fn sample_params(
    spec: &RandomMapSpec,
    x: f64,
    n: usize,
    streams: &StreamFactory,
    domain: Domain,
) -> Result<Vec<ParamPoint>> {
    if let Some(atoms) = spec.params.atoms() {
        return Ok(atoms);
    }
    (0..n)
        .map(|i| {
            let mut rng = streams.substream(domain, i as u64);
            spec.sample_parameter(x, &mut rng)
        })
        .collect()
}

/// `⋃_t T_t|_{[c,1]}⁻¹([0, eps0))` over sampled parameters.
pub fn pullback_region(
    spec: &RandomMapSpec,
    eps0: f64,
    streams: &StreamFactory,
) -> Result<Vec<(f64, f64)>> {
    let c = spec.a_cut;
    let params = sample_params(spec, c, PULLBACK_SAMPLES, streams, Domain::Pullback)?;
    let mut pieces = Vec::new();
    for p in &params {
        for b in spec.branches(p) {
            let Some(b) = b.clipped(c, 1.0) else { continue };
            let (ylo, yhi) = b.image();
            if ylo >= eps0 {
                continue;
            }
            let ends = [ylo.max(0.0), yhi.min(eps0)];
            let xs: Vec<f64> = ends.iter().filter_map(|&y| b.inverse(y)).collect();
            if xs.len() == 2 {
                pieces.push((xs[0].min(xs[1]), xs[0].max(xs[1])));
            }
        }
    }
    if pieces.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(merge_intervals(pieces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::grid::UlamGrid;

    #[test]
    fn bounds_on_step_density() {
        let h = DensityVector {
            grid: UlamGrid::new(8).unwrap(),
            values: vec![2.0, 2.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0],
        };
        assert_eq!(density_bounds_on(&h, &[(0.0, 0.25)]).unwrap(), (2.0, 2.0));
        assert_eq!(density_bounds_on(&h, &[(0.25, 0.75)]).unwrap(), (0.0, 2.0));
        assert_eq!(density_bounds_on(&h, &[(0.3, 0.2)]), Err(Error::EmptyRegion));
    }

    #[test]
    fn merge() {
        let m = merge_intervals(vec![(0.5, 0.6), (0.1, 0.2), (0.15, 0.3)]);
        assert_eq!(m, vec![(0.1, 0.3), (0.5, 0.6)]);
    }
}
