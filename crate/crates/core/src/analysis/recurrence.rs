//! Birkhoff averages at hyperbolic times and slow-recurrence profiles.

use serde::Serialize;

use crate::dynamics::{CirclePoint, MapSystem};
use crate::error::{Error, Result};
use crate::hyptimes::{detect_fast, HyperbolicParams};
use crate::numeric::{fixed_ratio, to_fixed, NeumaierSum};
use crate::orbits::{par_map_points, OrbitTrace};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BirkhoffReport {
    pub log_sigma: f64,
    /// Per trace: min over detected n of (1/n) Σ_{j<n} a_j, or `None` when
    /// censored.
    pub liminf_proxy: Vec<Option<f64>>,
    pub censored: usize,
    /// Detected (trace, n) with (1/n) Σ_{j<n} a_j > log σ.
    pub violations: usize,
}

impl BirkhoffReport {
    /// Fraction of uncensored traces whose proxy is <= log σ.
    pub fn fraction_negative(&self) -> f64 {
        let kept: Vec<f64> = self.liminf_proxy.iter().flatten().copied().collect();
        if kept.is_empty() {
            return f64::NAN;
        }
        kept.iter().filter(|&&v| v <= self.log_sigma).count() as f64 / kept.len() as f64
    }
}

/// Birkhoff averages of a_j at every detected hyperbolic time.
///
/// Sums are formed in the detectors' fixed-point representation, so the
/// comparison with log σ is the k = n instance of the detection inequality.
pub fn birkhoff_negativity(traces: &[OrbitTrace], params: &HyperbolicParams) -> Result<BirkhoffReport> {
    let log_sigma_fixed = to_fixed(params.log_sigma());
    let mut report = BirkhoffReport {
        log_sigma: params.log_sigma(),
        liminf_proxy: Vec::with_capacity(traces.len()),
        censored: 0,
        violations: 0,
    };
    for t in traces {
        let res = detect_fast(t, params)?;
        if res.times().is_empty() {
            report.censored += 1;
            report.liminf_proxy.push(None);
            continue;
        }
        let mut proxy = f64::INFINITY;
        let mut sum = 0i128;
        let mut next = res.times().iter().peekable();
        for (j, &a) in t.inv_deriv().iter().enumerate() {
            sum += to_fixed(a);
            let n = j + 1;
            if next.peek() == Some(&&n) {
                next.next();
                if sum > n as i128 * log_sigma_fixed {
                    report.violations += 1;
                }
                proxy = proxy.min(fixed_ratio(sum, n as u64));
            }
        }
        report.liminf_proxy.push(Some(proxy));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlowRecurrenceLevel {
    pub k: usize,
    pub delta: f64,
    pub mean_phi: f64,
    pub max_phi: f64,
    /// Empirical m(E_k), E_k = {φ_k > 1/k}.
    pub mass: f64,
    /// 2^{-(k+1)}.
    pub bound: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlowRecurrenceProfile {
    pub horizon: usize,
    pub levels: Vec<SlowRecurrenceLevel>,
    /// Points whose orbit hit S; excluded.
    pub dropped: usize,
    pub sample_size: usize,
}

impl SlowRecurrenceProfile {
    pub fn masses(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.mass).collect()
    }
}

/// δ_k = delta0 · 2^{-(k-1)} for k = 1..=levels.
pub fn halving_schedule(delta0: f64, levels: usize) -> Vec<(usize, f64)> {
    (1..=levels).map(|k| (k, delta0 * 0.5f64.powi(k as i32 - 1))).collect()
}

/// Finite-horizon φ_k(x) = (1/N) Σ_{j<N} -log dist_{δ_k}(f^j x, S) for every
/// level of the schedule, from one streamed orbit per point.
pub fn slow_recurrence_profile(
    map: &dyn MapSystem,
    points: &[CirclePoint],
    schedule: &[(usize, f64)],
    horizon: usize,
) -> Result<SlowRecurrenceProfile> {
    if horizon == 0 || points.is_empty() {
        return Err(Error::InvalidArgument("need a positive horizon and a non-empty ensemble".into()));
    }
    if let Some(&(_, d)) = schedule.iter().find(|(_, d)| !(*d > 0.0 && *d <= 1.0)) {
        return Err(Error::InvalidArgument(format!("delta_k = {d} must lie in (0, 1]")));
    }
    if schedule.windows(2).any(|w| w[1].1 > w[0].1) {
        return Err(Error::InvalidArgument("delta_k must be non-increasing in k".into()));
    }
    let has_s = !map.exceptional_set().is_empty();
    let phis = par_map_points(points, |_, x0| -> Option<Vec<f64>> {
        let mut sums = vec![NeumaierSum::new(); schedule.len()];
        let mut x = x0;
        for _ in 0..horizon {
            if has_s {
                let d = map.dist_to_s(x);
                if d < crate::dynamics::EXCEPTIONAL_GUARD {
                    return None;
                }
                let v = -d.ln();
                for (acc, &(_, delta)) in sums.iter_mut().zip(schedule) {
                    if d <= delta {
                        acc.add(v);
                    }
                }
            }
            x = map.eval(x);
        }
        Some(sums.iter().map(|s| s.value() / horizon as f64).collect())
    });
    let kept: Vec<Vec<f64>> = phis.iter().flatten().cloned().collect();
    let dropped = phis.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::InvalidArgument("every orbit hit the exceptional set".into()));
    }
    let size = kept.len() as f64;
    let levels = schedule
        .iter()
        .enumerate()
        .map(|(i, &(k, delta))| {
            let vals: Vec<f64> = kept.iter().map(|v| v[i]).collect();
            let mass = vals.iter().filter(|&&v| v > 1.0 / k as f64).count() as f64 / size;
            let bound = 0.5f64.powi(k as i32 + 1);
            SlowRecurrenceLevel {
                k,
                delta,
                mean_phi: vals.iter().copied().collect::<NeumaierSum>().value() / size,
                max_phi: vals.iter().copied().fold(0.0, f64::max),
                mass,
                bound,
                within_bound: mass <= bound,
            }
        })
        .collect();
    Ok(SlowRecurrenceProfile { horizon, levels, dropped, sample_size: kept.len() })
}
