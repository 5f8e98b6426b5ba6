//! Tail diagnostics for the first hyperbolic time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hyptimes::{geometric_schedule, CensorPolicy, FirstTimeDistribution};
use crate::numeric::ols_slope;

/// Minimum number of uncensored samples in the fit window.
pub const MIN_FIT_POINTS: u64 = 200;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
const GRID_PER_DECADE: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    /// (n, P(h > n)) on a log-spaced grid plus the horizon.
    pub survival: Vec<(usize, f64)>,
    /// (n, E[min(h, n)]) on the decade schedule, censored points at n.
    pub truncated_means: Vec<(usize, f64)>,
    /// (n, 10n, ratio) for consecutive decades.
    pub growth_ratios: Vec<(usize, usize, f64)>,
    /// Window [lo, hi] of the log-log survival fit.
    pub fit_window: (usize, usize),
    /// Uncensored samples with h in the fit window.
    pub fit_points: u64,
    /// Set when fit_points < [`MIN_FIT_POINTS`].
    pub too_few_in_window: bool,
    pub slope: Option<f64>,
    /// 2.5% and 97.5% bootstrap quantiles of the slope.
    pub slope_ci: Option<(f64, f64)>,
}

/// Integer grid 1 = n_0 < n_1 < ... <= horizon with about 20 points per
/// decade.
pub fn log_grid(horizon: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    loop {
        let n = 10f64.powf(i as f64 / GRID_PER_DECADE as f64).round() as usize;
        if n > horizon {
            break;
        }
        if out.last() != Some(&n) {
            out.push(n);
        }
        i += 1;
    }
    if out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

fn fit(dist: &FirstTimeDistribution, grid: &[usize]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .map(|&n| (n, dist.survival(n)))
        .filter(|&(_, s)| s > 0.0)
        .map(|(n, s)| ((n as f64).ln(), s.ln()))
        .unzip();
    ols_slope(&xs, &ys)
}

fn resample(dist: &FirstTimeDistribution, rng: &mut ChaCha8Rng) -> FirstTimeDistribution {
    let mut cumulative: Vec<(u64, Option<usize>)> = Vec::with_capacity(dist.histogram.len() + 1);
    let mut total = 0;
    for (&k, &c) in &dist.histogram {
        total += c;
        cumulative.push((total, Some(k)));
    }
    total += dist.censored;
    cumulative.push((total, None));
    let times = (0..dist.sample_size).map(|_| {
        let u = rng.random_range(0..total);
        let i = cumulative.partition_point(|&(c, _)| c <= u);
        match cumulative[i].1 {
            Some(k) => crate::hyptimes::FirstTime::At(k),
            None => crate::hyptimes::FirstTime::Censored { horizon: dist.horizon },
        }
    });
    FirstTimeDistribution::from_first_times(times, dist.horizon, dist.dropped)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Survival curve, truncated means, growth ratios and the top-decade tail
/// slope with a seeded bootstrap interval.
pub fn tail_report(dist: &FirstTimeDistribution, seed: u64) -> Result<TailReport> {
    if dist.sample_size == 0 || dist.horizon == 0 {
        return Err(Error::InvalidArgument("empty first-time distribution".into()));
    }
    let grid = log_grid(dist.horizon);
    let survival = grid.iter().map(|&n| (n, dist.survival(n))).collect();
    let truncated_means = dist.truncated_means(&geometric_schedule(dist.horizon), CensorPolicy::IncludeAtHorizon);
    let growth_ratios = truncated_means
        .windows(2)
        .map(|w| (w[0].0, w[1].0, w[1].1 / w[0].1))
        .collect();
    let lo = (dist.horizon / 10).max(1);
    let fit_window = (lo, dist.horizon);
    let fit_points: u64 = dist.histogram.range(lo..=dist.horizon).map(|(_, c)| c).sum();
    let window: Vec<usize> = grid.iter().copied().filter(|&n| n >= lo).collect();
    let slope = fit(dist, &window);
    let slope_ci = slope.and_then(|_| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut slopes: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
            .filter_map(|_| fit(&resample(dist, &mut rng), &window))
            .collect();
        if slopes.len() < 2 {
            return None;
        }
        slopes.sort_by(f64::total_cmp);
        Some((quantile(&slopes, 0.025), quantile(&slopes, 0.975)))
    });
    Ok(TailReport {
        survival,
        truncated_means,
        growth_ratios,
        fit_window,
        fit_points,
        too_few_in_window: fit_points < MIN_FIT_POINTS,
        slope,
        slope_ci,
    })
}
