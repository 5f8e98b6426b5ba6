//! Detection of (σ, δ)-hyperbolic times along orbit traces.
//!
//! n is a hyperbolic time for x when, for every 1 <= k <= n,
//!
//! ```text
//! Σ_{j=n-k}^{n-1} a_j <= k log σ     and     r_{n-k} >= b k log σ
//! ```
//!
//! where a_j = log ||Df(f^j x)^{-1}|| and r_j = log dist_δ(f^j x, S).
//!
//! Both inequalities are evaluated non-strictly on a 64-fractional-bit
//! fixed-point image of the observables. Integer arithmetic makes the window
//! sums exact, so the quadratic oracle [`detect_brute`] and the linear scan
//! [`detect_fast`] agree on every input, including exact ties such as the
//! doubling map at σ = 1/2.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::{CirclePoint, MapSystem};
use crate::error::{Error, Result};
use crate::numeric::to_fixed;
use crate::orbits::{par_map_points, OrbitStepper, OrbitTrace};

/// The parameter pack (σ, δ, b, β) with the constraint b < min{1/2, 1/(4β)}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperbolicParams {
    sigma: f64,
    delta: f64,
    b: f64,
    beta: f64,
    tolerance: f64,
}

impl HyperbolicParams {
    pub fn new(sigma: f64, delta: f64, b: f64, beta: f64) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(sigma > 0.0 && sigma < 1.0) {
            return bad(format!("sigma = {sigma} must lie in (0, 1)"));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return bad(format!("delta = {delta} must lie in (0, 1]"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return bad(format!("beta = {beta} must be positive"));
        }
        if !(b > 0.0) {
            return bad(format!("b = {b} must be positive"));
        }
        let bound = 0.5f64.min(1.0 / (4.0 * beta));
        if b >= bound {
            let which = if bound == 0.5 { "1/2".to_string() } else { format!("1/(4β) = {bound}") };
            return bad(format!(
                "b = {b} violates b < min{{1/2, 1/(4β)}}: requires b < {which} (beta = {beta})"
            ));
        }
        Ok(Self { sigma, delta, b, beta, tolerance: 0.0 })
    }

    /// Committed parameters for the intermittent circle map: σ = e^{-0.1},
    /// δ = 10^{-3}, b = 0.24, β = 1/2.
    pub fn intermittent_default() -> Self {
        Self::new((-0.1f64).exp(), 1e-3, 0.24, 0.5).expect("default parameters are valid")
    }

    /// Sets an additive slack on both inequalities, in log units. Defaults to
    /// zero.
    pub fn with_tolerance(mut self, tolerance: f64) -> Result<Self> {
        if !(tolerance >= 0.0 && tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerance = {tolerance} must be >= 0")));
        }
        self.tolerance = tolerance;
        Ok(self)
    }

    /// Returns a copy with a different σ, revalidated.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(sigma, self.delta, self.b, self.beta)?.with_tolerance(self.tolerance)
    }

    pub fn with_b(&self, b: f64) -> Result<Self> {
        Self::new(self.sigma, self.delta, b, self.beta)?.with_tolerance(self.tolerance)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn log_sigma(&self) -> f64 {
        self.sigma.ln()
    }

    /// c = -log σ > 0.
    pub fn c(&self) -> f64 {
        -self.sigma.ln()
    }

    fn bars(&self) -> FixedBars {
        FixedBars {
            log_sigma: to_fixed(self.log_sigma()),
            recurrence: to_fixed(self.b * self.c()),
            tolerance: to_fixed(self.tolerance),
        }
    }
}

/// Fixed-point images of log σ, b·c and the tolerance.
#[derive(Debug, Clone, Copy)]
struct FixedBars {
    log_sigma: i128,
    recurrence: i128,
    tolerance: i128,
}

/// First hyperbolic time, or a marker that none occurred up to the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FirstTime {
    At(usize),
    Censored { horizon: usize },
}

impl FirstTime {
    pub fn value(self) -> Option<usize> {
        match self {
            FirstTime::At(n) => Some(n),
            FirstTime::Censored { .. } => None,
        }
    }

    pub fn is_censored(self) -> bool {
        matches!(self, FirstTime::Censored { .. })
    }

    /// min(h, n) for n up to the horizon.
    pub fn truncated(self, n: usize) -> usize {
        match self {
            FirstTime::At(h) => h.min(n),
            FirstTime::Censored { horizon } => {
                debug_assert!(n <= horizon);
                n
            }
        }
    }
}

/// Detected hyperbolic times of one trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HypTimesResult {
    times: Vec<usize>,
    horizon: usize,
}

impl HypTimesResult {
    /// Strictly increasing hyperbolic times in [1, horizon].
    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn first(&self) -> FirstTime {
        match self.times.first() {
            Some(&n) => FirstTime::At(n),
            None => FirstTime::Censored { horizon: self.horizon },
        }
    }

    pub fn contains(&self, n: usize) -> bool {
        self.times.binary_search(&n).is_ok()
    }

    /// ℓ(n) = #{times <= n}.
    pub fn count_at(&self, n: usize) -> usize {
        self.times.partition_point(|&t| t <= n)
    }

    /// ℓ(n)/n.
    pub fn frequency_at(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.count_at(n) as f64 / n as f64
        }
    }

    /// Next hyperbolic time strictly after `n`.
    pub fn next_after(&self, n: usize) -> Option<usize> {
        let i = self.times.partition_point(|&t| t <= n);
        self.times.get(i).copied()
    }
}

fn check_trace(trace: &OrbitTrace, params: &HyperbolicParams) -> Result<()> {
    if trace.delta() != params.delta() {
        return Err(Error::DeltaMismatch { trace: trace.delta(), params: params.delta() });
    }
    Ok(())
}

/// Direct O(N^2) transcription of the definition. This is the test oracle
/// for [`detect_fast`].
pub fn detect_brute(trace: &OrbitTrace, params: &HyperbolicParams) -> Result<HypTimesResult> {
    check_trace(trace, params)?;
    let bars = params.bars();
    let a: Vec<i128> = trace.inv_deriv().iter().map(|&v| to_fixed(v)).collect();
    let r: Vec<i128> = trace.log_dist().iter().map(|&v| to_fixed(-v)).collect();
    let mut times = Vec::new();
    'outer: for n in 1..=a.len() {
        let mut window = 0i128;
        for k in 1..=n {
            window += a[n - k];
            let k = k as i128;
            if window > k * bars.log_sigma + bars.tolerance {
                continue 'outer;
            }
            if r[n - k as usize] > k * bars.recurrence + bars.tolerance {
                continue 'outer;
            }
        }
        times.push(n);
    }
    Ok(HypTimesResult { times, horizon: trace.len() })
}

/// Incremental single-pass detector.
///
/// With T_n = Σ_{j<n} a_j - n log σ, the derivative condition at n reads
/// T_n <= min_{m<n} T_m; with Q = b·(-log σ) and R_m = -r_m the recurrence
/// condition reads n·Q >= max_{m<n} (m·Q + R_m).
#[derive(Debug, Clone)]
pub struct HyperbolicScanner {
    bars: FixedBars,
    n: i128,
    t: i128,
    t_min: i128,
    bar_max: i128,
}

impl HyperbolicScanner {
    pub fn new(params: &HyperbolicParams) -> Self {
        Self {
            bars: params.bars(),
            n: 0,
            t: 0,
            t_min: i128::MAX,
            bar_max: i128::MIN,
        }
    }

    /// Number of observations consumed so far.
    pub fn steps(&self) -> usize {
        self.n as usize
    }

    /// Consumes (a_n, r_n) and reports whether n + 1 is a hyperbolic time.
    pub fn push(&mut self, a: f64, r: f64) -> bool {
        let q = self.bars.recurrence;
        self.t_min = self.t_min.min(self.t);
        self.bar_max = self.bar_max.max(self.n * q + to_fixed(-r));
        self.t += to_fixed(a) - self.bars.log_sigma;
        self.n += 1;
        self.t <= self.t_min + self.bars.tolerance && self.n * q + self.bars.tolerance >= self.bar_max
    }
}

/// Linear-time detector: identical output to [`detect_brute`].
pub fn detect_fast(trace: &OrbitTrace, params: &HyperbolicParams) -> Result<HypTimesResult> {
    check_trace(trace, params)?;
    let mut scanner = HyperbolicScanner::new(params);
    let times = trace
        .inv_deriv()
        .iter()
        .zip(trace.log_dist())
        .enumerate()
        .filter_map(|(j, (&a, &r))| scanner.push(a, r).then_some(j + 1))
        .collect();
    Ok(HypTimesResult { times, horizon: trace.len() })
}

/// First hyperbolic time of `x0`, iterating lazily and stopping as soon as
/// one is found. Errors if the orbit reaches S first.
pub fn first_hyperbolic_time(
    map: &dyn MapSystem,
    x0: CirclePoint,
    params: &HyperbolicParams,
    horizon: usize,
) -> Result<FirstTime> {
    let mut stepper = OrbitStepper::new(map, x0, params.delta())?;
    let mut scanner = HyperbolicScanner::new(params);
    for _ in 0..horizon {
        let s = stepper.step()?;
        if scanner.push(s.a, s.r) {
            return Ok(FirstTime::At(scanner.steps()));
        }
    }
    Ok(FirstTime::Censored { horizon })
}

/// Per-point scan summary for long orbits that are not stored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointScan {
    pub index: usize,
    pub x0: f64,
    pub first: FirstTime,
    /// ℓ(n) at each requested horizon.
    pub counts: Vec<usize>,
}

/// Streams the orbit of `x0` up to the largest horizon, recording the first
/// hyperbolic time and the counts ℓ(n) at each horizon (sorted ascending).
pub fn scan_point(
    map: &dyn MapSystem,
    index: usize,
    x0: CirclePoint,
    params: &HyperbolicParams,
    horizons: &[usize],
) -> Result<PointScan> {
    let horizon = horizons.iter().copied().max().unwrap_or(0);
    let mut stepper = OrbitStepper::new(map, x0, params.delta())?;
    let mut scanner = HyperbolicScanner::new(params);
    let mut first = FirstTime::Censored { horizon };
    let mut count = 0usize;
    let mut counts = vec![0; horizons.len()];
    let mut order: Vec<usize> = (0..horizons.len()).collect();
    order.sort_by_key(|&i| horizons[i]);
    let mut next = 0;
    while next < order.len() && horizons[order[next]] == 0 {
        next += 1;
    }
    for n in 1..=horizon {
        let s = stepper.step()?;
        if scanner.push(s.a, s.r) {
            count += 1;
            if first.is_censored() {
                first = FirstTime::At(n);
            }
        }
        while next < order.len() && horizons[order[next]] == n {
            counts[order[next]] = count;
            next += 1;
        }
    }
    Ok(PointScan { index, x0: x0.coord(), first, counts })
}

/// Empirical law of the first hyperbolic time h over an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstTimeDistribution {
    /// k -> number of sample points with h = k.
    pub histogram: BTreeMap<usize, u64>,
    /// Points with h > horizon.
    pub censored: u64,
    pub horizon: usize,
    /// Points that entered the statistics (dropped points excluded).
    pub sample_size: u64,
    /// Points whose orbit hit S before a hyperbolic time.
    pub dropped: u64,
}

/// Treatment of censored points in truncated means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CensorPolicy {
    /// Count censored points at min(h, n) = n, a lower bound on the mean.
    #[default]
    IncludeAtHorizon,
    /// Drop censored points from numerator and denominator.
    Exclude,
}

impl FirstTimeDistribution {
    pub fn from_first_times(times: impl IntoIterator<Item = FirstTime>, horizon: usize, dropped: u64) -> Self {
        let mut histogram = BTreeMap::new();
        let mut censored = 0;
        let mut sample_size = 0;
        for t in times {
            sample_size += 1;
            match t {
                FirstTime::At(k) if k <= horizon => *histogram.entry(k).or_insert(0) += 1,
                _ => censored += 1,
            }
        }
        Self { histogram, censored, horizon, sample_size, dropped }
    }

    /// Empirical m(H_k^*).
    pub fn mass(&self, k: usize) -> f64 {
        self.histogram.get(&k).copied().unwrap_or(0) as f64 / self.sample_size as f64
    }

    /// Empirical P(h > n), for n <= horizon.
    pub fn survival(&self, n: usize) -> f64 {
        let at_most: u64 = self.histogram.range(..=n).map(|(_, c)| c).sum();
        (self.sample_size - at_most) as f64 / self.sample_size as f64
    }

    /// E[min(h, n)] for n <= horizon.
    pub fn truncated_mean(&self, n: usize, policy: CensorPolicy) -> f64 {
        let n = n.min(self.horizon);
        let mut numerator: u128 = self
            .histogram
            .iter()
            .map(|(&k, &c)| k.min(n) as u128 * c as u128)
            .sum();
        let mut denominator = self.sample_size;
        match policy {
            CensorPolicy::IncludeAtHorizon => numerator += self.censored as u128 * n as u128,
            CensorPolicy::Exclude => denominator -= self.censored,
        }
        if denominator == 0 {
            return f64::NAN;
        }
        numerator as f64 / denominator as f64
    }

    /// Truncated means over a schedule of n values.
    pub fn truncated_means(&self, schedule: &[usize], policy: CensorPolicy) -> Vec<(usize, f64)> {
        schedule.iter().map(|&n| (n, self.truncated_mean(n, policy))).collect()
    }
}

/// 1, 10, 100, ... up to `horizon`, with `horizon` itself appended when it is
/// not a power of ten.
pub fn geometric_schedule(horizon: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = 1usize;
    while n <= horizon {
        out.push(n);
        match n.checked_mul(10) {
            Some(m) => n = m,
            None => break,
        }
    }
    if out.last() != Some(&horizon) && horizon > 0 {
        out.push(horizon);
    }
    out
}

/// First-hyperbolic-time distribution over an ensemble of initial points.
/// Points whose orbits hit S are dropped and counted.
pub fn first_time_distribution(
    map: &dyn MapSystem,
    points: &[CirclePoint],
    params: &HyperbolicParams,
    horizon: usize,
) -> Result<FirstTimeDistribution> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("ensemble must contain at least one point".into()));
    }
    let results = par_map_points(points, |_, x| first_hyperbolic_time(map, x, params, horizon));
    let mut dropped = 0;
    let mut times = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(t) => times.push(t),
            Err(Error::OrbitHitExceptionalSet { .. }) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(FirstTimeDistribution::from_first_times(times, horizon, dropped))
}

/// Empirical masses of H_n, H_n^* and R_{n,k} over an ensemble of traces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetStatistics {
    pub n_max: usize,
    pub sample_size: usize,
    /// m(H_n) for n = 1..=n_max (index n - 1).
    pub h: Vec<f64>,
    /// m(H_n^*) for n = 1..=n_max (index n - 1).
    pub h_star: Vec<f64>,
    /// Fraction of points with no hyperbolic time up to n_max.
    pub censored_fraction: f64,
    /// (n, k) -> number of points for which n <= n_max is a hyperbolic time
    /// and n + k the next one.
    pub gaps: BTreeMap<(usize, usize), u64>,
}

impl SetStatistics {
    /// Empirical m(R_{n,k}).
    pub fn r_mass(&self, n: usize, k: usize) -> f64 {
        self.gaps.get(&(n, k)).copied().unwrap_or(0) as f64 / self.sample_size as f64
    }
}

pub fn classify_sets(traces: &[OrbitTrace], params: &HyperbolicParams, n_max: usize) -> Result<SetStatistics> {
    if traces.is_empty() {
        return Err(Error::InvalidArgument("no traces".into()));
    }
    if let Some(t) = traces.iter().find(|t| t.len() < n_max) {
        return Err(Error::InvalidArgument(format!(
            "trace of length {} shorter than n_max = {n_max}",
            t.len()
        )));
    }
    let results = traces
        .iter()
        .map(|t| detect_fast(t, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(classify_results(&results, n_max))
}

/// [`classify_sets`] on precomputed detections.
pub fn classify_results(results: &[HypTimesResult], n_max: usize) -> SetStatistics {
    let size = results.len() as f64;
    let mut h = vec![0u64; n_max];
    let mut h_star = vec![0u64; n_max];
    let mut censored = 0u64;
    let mut gaps = BTreeMap::new();
    for res in results {
        let times = res.times();
        match times.first() {
            Some(&f) if f <= n_max => h_star[f - 1] += 1,
            _ => censored += 1,
        }
        for (i, &n) in times.iter().enumerate() {
            if n > n_max {
                break;
            }
            h[n - 1] += 1;
            if let Some(&next) = times.get(i + 1) {
                *gaps.entry((n, next - n)).or_insert(0) += 1;
            }
        }
    }
    SetStatistics {
        n_max,
        sample_size: results.len(),
        h: h.into_iter().map(|c| c as f64 / size).collect(),
        h_star: h_star.into_iter().map(|c| c as f64 / size).collect(),
        censored_fraction: censored as f64 / size,
        gaps,
    }
}

/// Frequencies ℓ(n)/n per point and the fraction of points reaching each θ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyReport {
    pub horizons: Vec<usize>,
    pub thetas: Vec<f64>,
    /// Per point: ℓ(n) at each horizon.
    pub counts: Vec<Vec<usize>>,
    /// fractions[t][h]: fraction of points with ℓ(n_h)/n_h >= θ_t.
    pub fractions: Vec<Vec<f64>>,
}

impl FrequencyReport {
    pub fn from_counts(counts: Vec<Vec<usize>>, horizons: &[usize], thetas: &[f64]) -> Self {
        let size = counts.len().max(1) as f64;
        let fractions = thetas
            .iter()
            .map(|&theta| {
                horizons
                    .iter()
                    .enumerate()
                    .map(|(h, &n)| {
                        counts
                            .iter()
                            .filter(|c| n > 0 && c[h] as f64 / n as f64 >= theta)
                            .count() as f64
                            / size
                    })
                    .collect()
            })
            .collect();
        Self { horizons: horizons.to_vec(), thetas: thetas.to_vec(), counts, fractions }
    }

    pub fn frequency(&self, point: usize, horizon_index: usize) -> f64 {
        self.counts[point][horizon_index] as f64 / self.horizons[horizon_index] as f64
    }
}

/// Frequency report over stored traces.
pub fn frequency_report(
    traces: &[OrbitTrace],
    params: &HyperbolicParams,
    horizons: &[usize],
    thetas: &[f64],
) -> Result<FrequencyReport> {
    if let Some(&n) = horizons.iter().find(|&&n| traces.iter().any(|t| t.len() < n)) {
        return Err(Error::InvalidArgument(format!("horizon {n} exceeds a trace length")));
    }
    let counts = traces
        .iter()
        .map(|t| detect_fast(t, params).map(|r| horizons.iter().map(|&n| r.count_at(n)).collect()))
        .collect::<Result<Vec<Vec<usize>>>>()?;
    Ok(FrequencyReport::from_counts(counts, horizons, thetas))
}

/// Streams every orbit of the ensemble; points whose orbit hits S are
/// returned as errors in their slot.
pub fn scan_ensemble(
    map: &dyn MapSystem,
    points: &[CirclePoint],
    params: &HyperbolicParams,
    horizons: &[usize],
) -> Vec<Result<PointScan>> {
    par_map_points(points, |i, x| scan_point(map, i, x, params, horizons))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DoublingBaselineMap, IntermittentCircleMap};
    use crate::orbits::generate_orbit;

    fn synthetic(a: &[f64], r: &[f64]) -> OrbitTrace {
        OrbitTrace::from_observables(a.to_vec(), r.to_vec(), 1.0).unwrap()
    }

    fn params(sigma: f64) -> HyperbolicParams {
        HyperbolicParams::new(sigma, 1.0, 0.25, 0.5).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(HyperbolicParams::new(0.5, 0.1, 0.25, 0.5).is_ok());
        let err = HyperbolicParams::new(0.5, 0.1, 0.6, 0.5).unwrap_err().to_string();
        assert!(err.contains("b < 1/2"), "{err}");
        let err = HyperbolicParams::new(0.5, 0.1, 0.3, 1.0).unwrap_err().to_string();
        assert!(err.contains("1/(4β) = 0.25"), "{err}");
        assert!(HyperbolicParams::new(1.0, 0.1, 0.1, 0.5).is_err());
        assert!(HyperbolicParams::new(0.5, 0.0, 0.1, 0.5).is_err());
        assert!(HyperbolicParams::new(0.5, 0.1, 0.1, 0.0).is_err());
        let p = HyperbolicParams::intermittent_default();
        assert!(p.c() > 0.0 && p.log_sigma() < 0.0);
        assert!((p.c() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn doubling_equality_case_gives_every_time() {
        let p = HyperbolicParams::new(0.5, 0.1, 0.25, 0.5).unwrap();
        let t = generate_orbit(&DoublingBaselineMap, CirclePoint::new(0.123).unwrap(), 64, 0.1).unwrap();
        let expected: Vec<usize> = (1..=64).collect();
        assert_eq!(detect_brute(&t, &p).unwrap().times(), expected.as_slice());
        assert_eq!(detect_fast(&t, &p).unwrap().times(), expected.as_slice());
        let p = p.with_sigma(0.6).unwrap();
        assert_eq!(detect_fast(&t, &p).unwrap().times(), expected.as_slice());
    }

    #[test]
    fn hand_checked_two_step_trace() {
        let t = synthetic(&[0.9f64.ln(), 0.1f64.ln()], &[0.0, 0.0]);
        assert_eq!(detect_brute(&t, &params(0.5)).unwrap().times(), &[2]);
        assert_eq!(detect_fast(&t, &params(0.5)).unwrap().times(), &[2]);
    }

    #[test]
    fn neutral_trace_has_no_times() {
        let t = synthetic(&[0.0; 30], &[0.0; 30]);
        let res = detect_fast(&t, &params(0.9)).unwrap();
        assert!(res.times().is_empty());
        assert_eq!(res.first(), FirstTime::Censored { horizon: 30 });
        assert_eq!(res.times(), detect_brute(&t, &params(0.9)).unwrap().times());
    }

    #[test]
    fn recurrence_threshold_equality_is_admissible() {
        // b c = 0.25 * ln 2; r_0 = -2 b c makes n = 2 the earliest admissible time
        let p = params(0.5);
        let q = p.b() * p.c();
        let t = synthetic(&[-1.0; 4], &[-2.0 * q, 0.0, 0.0, 0.0]);
        assert_eq!(detect_fast(&t, &p).unwrap().times(), &[2, 3, 4]);
        assert_eq!(detect_brute(&t, &p).unwrap().times(), &[2, 3, 4]);
    }

    #[test]
    fn tolerance_relaxes_both_conditions() {
        let p = params(0.5);
        let t = synthetic(&[0.5f64.ln() + 1e-6, -1.0], &[0.0, 0.0]);
        assert_eq!(detect_fast(&t, &p).unwrap().times(), &[2]);
        let loose = p.with_tolerance(1e-5).unwrap();
        assert_eq!(detect_fast(&t, &loose).unwrap().times(), &[1, 2]);
        assert_eq!(detect_brute(&t, &loose).unwrap().times(), &[1, 2]);
    }

    #[test]
    fn delta_mismatch_rejected() {
        let t = OrbitTrace::from_observables(vec![-1.0], vec![0.0], 0.1).unwrap();
        assert!(matches!(detect_fast(&t, &params(0.5)), Err(Error::DeltaMismatch { .. })));
        assert!(matches!(detect_brute(&t, &params(0.5)), Err(Error::DeltaMismatch { .. })));
    }

    #[test]
    fn result_accessors() {
        let t = synthetic(&[0.9f64.ln(), -5.0, 0.0, -5.0], &[0.0; 4]);
        let res = detect_fast(&t, &params(0.5)).unwrap();
        assert_eq!(res.times(), &[2, 4]);
        assert_eq!(res.first(), FirstTime::At(2));
        assert_eq!(res.count_at(1), 0);
        assert_eq!(res.count_at(3), 1);
        assert_eq!(res.frequency_at(4), 0.5);
        assert_eq!(res.next_after(2), Some(4));
        assert_eq!(res.next_after(4), None);
    }

    #[test]
    fn first_time_doubling_is_one() {
        let p = HyperbolicParams::new(0.5, 0.1, 0.25, 0.5).unwrap();
        for x in [-0.9, -0.3, 0.1, 0.77] {
            let h = first_hyperbolic_time(&DoublingBaselineMap, CirclePoint::new(x).unwrap(), &p, 10).unwrap();
            assert_eq!(h, FirstTime::At(1));
        }
    }

    #[test]
    fn first_time_reports_hitting_s() {
        let p = HyperbolicParams::intermittent_default();
        let err = first_hyperbolic_time(&IntermittentCircleMap, CirclePoint::new(0.0).unwrap(), &p, 10);
        assert!(matches!(err, Err(Error::OrbitHitExceptionalSet { step: 0, .. })));
        // 1 is already a hyperbolic time for 0.25, whose image is 0
        let x = CirclePoint::new(0.25).unwrap();
        assert_eq!(first_hyperbolic_time(&IntermittentCircleMap, x, &p, 10).unwrap(), FirstTime::At(1));
        let err = scan_point(&IntermittentCircleMap, 0, x, &p, &[10]);
        assert!(matches!(err, Err(Error::OrbitHitExceptionalSet { step: 1, .. })));
    }

    #[test]
    fn distribution_bookkeeping() {
        let d = FirstTimeDistribution::from_first_times(
            [FirstTime::At(1), FirstTime::At(1), FirstTime::At(3), FirstTime::Censored { horizon: 10 }],
            10,
            2,
        );
        assert_eq!(d.sample_size, 4);
        assert_eq!(d.censored, 1);
        assert_eq!(d.dropped, 2);
        assert_eq!(d.histogram.values().sum::<u64>() + d.censored, d.sample_size);
        assert_eq!(d.mass(1), 0.5);
        assert_eq!(d.survival(0), 1.0);
        assert_eq!(d.survival(1), 0.5);
        assert_eq!(d.survival(3), 0.25);
        assert_eq!(d.truncated_mean(2, CensorPolicy::IncludeAtHorizon), (1.0 + 1.0 + 2.0 + 2.0) / 4.0);
        assert_eq!(d.truncated_mean(10, CensorPolicy::IncludeAtHorizon), (1.0 + 1.0 + 3.0 + 10.0) / 4.0);
        assert_eq!(d.truncated_mean(10, CensorPolicy::Exclude), 5.0 / 3.0);
    }

    #[test]
    fn schedules() {
        assert_eq!(geometric_schedule(1000), vec![1, 10, 100, 1000]);
        assert_eq!(geometric_schedule(500), vec![1, 10, 100, 500]);
        assert_eq!(geometric_schedule(1), vec![1]);
    }

    #[test]
    fn scan_point_matches_stored_detection() {
        let p = HyperbolicParams::intermittent_default();
        let x0 = CirclePoint::new(0.3141).unwrap();
        let t = generate_orbit(&IntermittentCircleMap, x0, 5000, p.delta()).unwrap();
        let res = detect_fast(&t, &p).unwrap();
        let scan = scan_point(&IntermittentCircleMap, 0, x0, &p, &[5000, 10, 777]).unwrap();
        assert_eq!(scan.counts, vec![res.count_at(5000), res.count_at(10), res.count_at(777)]);
        assert_eq!(scan.first, res.first());
    }

    #[test]
    fn frequency_report_for_doubling_is_one() {
        let p = HyperbolicParams::new(0.5, 0.1, 0.25, 0.5).unwrap();
        let traces: Vec<_> = [0.1, -0.4, 0.9]
            .iter()
            .map(|&x| generate_orbit(&DoublingBaselineMap, CirclePoint::new(x).unwrap(), 100, 0.1).unwrap())
            .collect();
        let rep = frequency_report(&traces, &p, &[10, 100], &[0.5, 1.0]).unwrap();
        for i in 0..3 {
            assert_eq!(rep.frequency(i, 0), 1.0);
            assert_eq!(rep.frequency(i, 1), 1.0);
        }
        assert_eq!(rep.fractions, vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(frequency_report(&traces, &p, &[101], &[0.5]).is_err());
    }

    #[test]
    fn classify_doubling() {
        let p = HyperbolicParams::new(0.5, 0.1, 0.25, 0.5).unwrap();
        let traces: Vec<_> = [0.1, -0.4]
            .iter()
            .map(|&x| generate_orbit(&DoublingBaselineMap, CirclePoint::new(x).unwrap(), 20, 0.1).unwrap())
            .collect();
        let s = classify_sets(&traces, &p, 10).unwrap();
        assert!(s.h.iter().all(|&m| m == 1.0));
        assert_eq!(s.h_star[0], 1.0);
        assert!(s.h_star[1..].iter().all(|&m| m == 0.0));
        assert_eq!(s.censored_fraction, 0.0);
        assert_eq!(s.r_mass(3, 1), 1.0);
        assert!(classify_sets(&traces, &p, 21).is_err());
    }
}
