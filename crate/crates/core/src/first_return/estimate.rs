use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_core::MarkovStep;
use crate::par;
use crate::rng::{Domain, StreamFactory};

use super::excursion::{run_excursion, ReturnHistogram, DEFAULT_CAP};
use super::targets::{Target, TargetSet};

pub const MIN_RETURNS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Per-excursion step cap.
    pub cap: u64,
    /// Independent chain segments; results depend on (seed, segments) only.
    pub segments: usize,
    /// Fraction of each segment's returns discarded as burn-in.
    pub burn_in: f64,
    pub max_capped_fraction: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            segments: 64,
            burn_in: 0.1,
            max_capped_fraction: 0.1,
        }
    }
}

/// `μ̂(D)` for each target, normalized by `μ(A) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaFiniteEstimate {
    pub cut: f64,
    pub targets: Vec<Target>,
    pub mu_hat: Vec<f64>,
    pub stderr: Vec<f64>,
    /// The same estimate from the first half of the segments.
    pub mu_hat_half: Vec<f64>,
    /// Per-segment means, for resampling.
    pub segment_means: Vec<Vec<f64>>,
    pub excursions: u64,
    pub capped_fraction: f64,
    pub zero_hits: u64,
    pub total_steps: u64,
    pub tail_exponent: Option<f64>,
}

struct Segment {
    totals: Vec<u64>,
    excursions: u64,
    capped: u64,
    zero_hits: u64,
    steps: u64,
    hist: ReturnHistogram,
    states: Vec<f64>,
}

/// Runs `segments` independent return-state chains, each started uniformly
/// in `A` from its own stream. `keep_states` retains post-burn-in return
/// states.
fn run_segments<M: MarkovStep + ?Sized>(
    map: &M,
    cut: f64,
    set: &TargetSet,
    n_returns: usize,
    cfg: &EstimatorConfig,
    streams: &StreamFactory,
    keep_states: bool,
) -> Result<Vec<Segment>> {
    let k = cfg.segments.max(2);
    let per = n_returns.div_ceil(k);
    let burn = (per as f64 * cfg.burn_in).floor() as usize;
    par::try_map_indexed(k, |seg| {
        let mut rng = streams.substream(Domain::Excursion, seg as u64);
        let mut x = cut + (1.0 - cut) * rng.gen::<f64>();
        let mut tally = set.counter();
        let mut out = Segment {
            totals: Vec::new(),
            excursions: 0,
            capped: 0,
            zero_hits: 0,
            steps: 0,
            hist: ReturnHistogram::default(),
            states: Vec::new(),
        };
        for r in 0..per {
            let keep = r >= burn;
            let o = if keep {
                run_excursion(map, cut, x, cfg.cap, &mut rng, |y, m| set.record(&mut tally, y, m))?
            } else {
                run_excursion(map, cut, x, cfg.cap, &mut rng, |_, _| {})?
            };
            if keep {
                out.excursions += 1;
                out.capped += o.capped as u64;
                out.zero_hits += o.hit_zero as u64;
                out.steps += o.return_time;
                out.hist.add(o.return_time);
                if keep_states {
                    out.states.push(x);
                }
            }
            // A capped excursion has no return state; a deterministic map
            // would replay it from `x`, so the chain restarts in `A`.
            x = if o.capped { cut + (1.0 - cut) * rng.gen::<f64>() } else { o.end };
        }
        out.totals = set.totals(&tally);
        Ok(out)
    })
}

/// Occupation estimate of `μ(D) = Σ_n ∫_A Ũⁿ(U 1_D) dμ_A` with `μ_A` sampled
/// by the return-state chain.
pub fn estimate_measure<M: MarkovStep + ?Sized>(
    map: &M,
    cut: f64,
    targets: &[Target],
    n_returns: usize,
    cfg: &EstimatorConfig,
    streams: &StreamFactory,
) -> Result<SigmaFiniteEstimate> {
    let set = TargetSet::new(targets);
    let segs = run_segments(map, cut, &set, n_returns, cfg, streams, false)?;
    let excursions: u64 = segs.iter().map(|s| s.excursions).sum();
    if (excursions as usize) < MIN_RETURNS {
        return Err(Error::InsufficientReturns {
            got: excursions as usize,
            need: MIN_RETURNS,
        });
    }
    let capped: u64 = segs.iter().map(|s| s.capped).sum();
    let mut hist = ReturnHistogram::default();
    segs.iter().for_each(|s| hist.merge(&s.hist));
    let capped_fraction = capped as f64 / excursions as f64;
    if capped_fraction > cfg.max_capped_fraction {
        return Err(Error::CapExceededFraction {
            fraction: capped_fraction,
            tail_exponent: hist.tail_exponent(),
        });
    }
    let nt = targets.len();
    let pooled = |ss: &[Segment]| -> Vec<f64> {
        let e: u64 = ss.iter().map(|s| s.excursions).sum();
        (0..nt)
            .map(|i| ss.iter().map(|s| s.totals[i]).sum::<u64>() as f64 / e.max(1) as f64)
            .collect()
    };
    let mu_hat = pooled(&segs);
    let mu_hat_half = pooled(&segs[..segs.len() / 2]);
    let segment_means: Vec<Vec<f64>> = segs
        .iter()
        .map(|s| s.totals.iter().map(|&t| t as f64 / s.excursions.max(1) as f64).collect())
        .collect();
    let k = segs.len() as f64;
    let stderr = (0..nt)
        .map(|i| {
            let var = segment_means.iter().map(|m| (m[i] - mu_hat[i]).powi(2)).sum::<f64>()
                / (k - 1.0);
            (var / k).sqrt()
        })
        .collect();
    Ok(SigmaFiniteEstimate {
        cut,
        targets: targets.to_vec(),
        mu_hat,
        stderr,
        mu_hat_half,
        segment_means,
        excursions,
        capped_fraction,
        zero_hits: segs.iter().map(|s| s.zero_hits).sum(),
        total_steps: segs.iter().map(|s| s.steps).sum(),
        tail_exponent: hist.tail_exponent(),
    })
}

/// `p̂_1 … p̂_N(x0)` and the mass not returned by step `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnTimeHistogram {
    pub x0: f64,
    pub trials: u64,
    pub probs: Vec<f64>,
    pub tail: f64,
}

impl ReturnTimeHistogram {
    /// Standard error of `p̂_n`.
    pub fn stderr(&self, n: usize) -> f64 {
        let p = self.probs[n - 1];
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Independent single excursions from `x0`, capped at `N` steps.
pub fn estimate_return_probs<M: MarkovStep + ?Sized>(
    map: &M,
    cut: f64,
    x0: f64,
    n_trials: usize,
    n_max: usize,
    streams: &StreamFactory,
) -> Result<ReturnTimeHistogram> {
    const BLOCKS: usize = 64;
    let per = n_trials.div_ceil(BLOCKS);
    let blocks = par::try_map_indexed(BLOCKS, |b| {
        let mut rng = streams.substream(Domain::ReturnProbs, b as u64);
        let mut counts = vec![0u64; n_max + 1];
        let lo = b * per;
        let hi = ((b + 1) * per).min(n_trials);
        for _ in lo..hi {
            let o = run_excursion(map, cut, x0, n_max as u64, &mut rng, |_, _| {})?;
            let n = if o.capped { n_max + 1 } else { o.return_time as usize };
            counts[n.min(n_max + 1) - 1] += 1;
        }
        Ok::<_, Error>(counts)
    })?;
    let mut counts = vec![0u64; n_max + 1];
    for b in blocks {
        counts.iter_mut().zip(&b).for_each(|(a, c)| *a += c);
    }
    let total: u64 = counts.iter().sum();
    let probs: Vec<f64> = counts[..n_max].iter().map(|&c| c as f64 / total as f64).collect();
    Ok(ReturnTimeHistogram {
        x0,
        trials: total,
        tail: counts[n_max] as f64 / total as f64,
        probs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    /// L¹ distance between the return-state law and its image under one more
    /// return step.
    pub residual: f64,
    /// L¹ distance between the laws of the two halves of the sample, scaled
    /// to the size of the full comparison.
    pub noise_floor: f64,
    pub passed: bool,
    /// Return-state density on `A`, normalized to mean 1.
    pub density: Vec<f64>,
    pub returns: u64,
}

/// Compares the empirical law of return states with its push-forward by an
/// independent return step.
pub fn check_r_invariance<M: MarkovStep + ?Sized>(
    map: &M,
    cut: f64,
    n_returns: usize,
    n_bins: usize,
    cfg: &EstimatorConfig,
    streams: &StreamFactory,
) -> Result<InvarianceReport> {
    let set = TargetSet::new(&[]);
    let segs = run_segments(map, cut, &set, n_returns, cfg, streams, true)?;
    let states: Vec<f64> = segs.into_iter().flat_map(|s| s.states).collect();
    if states.len() < MIN_RETURNS {
        return Err(Error::InsufficientReturns {
            got: states.len(),
            need: MIN_RETURNS,
        });
    }
    let push = streams.fork(Domain::Invariance as u64);
    let chunk = states.len().div_ceil(64);
    let pushed: Vec<f64> = par::try_map_indexed(64, |b| {
        let mut rng = push.substream(Domain::Invariance, b as u64);
        let lo = (b * chunk).min(states.len());
        let hi = ((b + 1) * chunk).min(states.len());
        states[lo..hi]
            .iter()
            .map(|&x| run_excursion(map, cut, x, cfg.cap, &mut rng, |_, _| {}).map(|o| if o.capped { x } else { o.end }))
            .collect::<Result<Vec<f64>>>()
    })?
    .into_iter()
    .flatten()
    .collect();
    let hist = |xs: &[f64]| -> Vec<f64> {
        let mut h = vec![0.0; n_bins];
        for &x in xs {
            let k = (((x - cut) / (1.0 - cut)) * n_bins as f64).floor();
            h[(k.max(0.0) as usize).min(n_bins - 1)] += 1.0;
        }
        let n = xs.len() as f64;
        h.iter_mut().for_each(|v| *v /= n);
        h
    };
    let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    let h0 = hist(&states);
    let h1 = hist(&pushed);
    let residual = l1(&h0, &h1);
    // halves compare samples of size n/2: scale to the full-size comparison
    let half = states.len() / 2;
    let noise_floor = l1(&hist(&states[..half]), &hist(&states[half..])) / 2f64.sqrt();
    Ok(InvarianceReport {
        residual,
        passed: residual <= 5.0 * noise_floor,
        noise_floor,
        density: h0.iter().map(|p| p * n_bins as f64).collect(),
        returns: states.len() as u64,
    })
}
