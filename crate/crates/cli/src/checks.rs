//! The acceptance criteria as executable checks.
//!
//! Every check runs on the intermittent map with the configured parameters
//! (checks 7 and 9 also use the doubling map at σ = 1/2) at the sizes in
//! [`ReportConfig`]. Each outcome lists its conditions with measured value,
//! threshold and verdict.

use std::time::{Duration, Instant};

use hyptimes_core::analysis::lemma51::sweep_grid;
use hyptimes_core::analysis::{
    contraction_check, distortion_check, lemma51_sweep, log_dist_moment, lyapunov_integral, LyapunovMethod, Truncation,
    DEFAULT_ARC_RADIUS,
};
use hyptimes_core::hyptimes::{
    detect_brute, detect_fast, first_time_distribution, scan_ensemble, CensorPolicy, FirstTime,
};
use hyptimes_core::measures::{build_ulam_exact, invariant_density, pushforward_restricted_streaming, transfer_apply};
use hyptimes_core::orbits::generate_orbit;
use hyptimes_core::{CirclePoint, DoublingBaselineMap, EnsembleSpec, HyperbolicParams, IntermittentCircleMap, OrbitTrace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{derive_seed, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::output::Artifact;

const F: IntermittentCircleMap = IntermittentCircleMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub label: String,
    pub measured: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub passed: bool,
}

impl Condition {
    pub fn at_most(label: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self { label: label.into(), measured, comparison: Comparison::AtMost, threshold, passed: measured <= threshold }
    }

    pub fn at_least(label: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self { label: label.into(), measured, comparison: Comparison::AtLeast, threshold, passed: measured >= threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub conditions: Vec<Condition>,
    pub details: serde_json::Value,
}

impl CheckOutcome {
    pub fn from_conditions(id: u32, name: &'static str, conditions: Vec<Condition>, details: serde_json::Value) -> Self {
        let passed = !conditions.is_empty() && conditions.iter().all(|c| c.passed);
        Self { id, name, passed, conditions, details }
    }

    /// One-line human summary: "[PASS] 3 name: label = v <= t; ...".
    pub fn summary_line(&self) -> String {
        let conds: Vec<String> = self
            .conditions
            .iter()
            .map(|c| {
                let op = match c.comparison {
                    Comparison::AtMost => "<=",
                    Comparison::AtLeast => ">=",
                };
                format!("{} = {:.6e} {op} {:.3e}", c.label, c.measured, c.threshold)
            })
            .collect();
        format!(
            "[{}] {:>2} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            conds.join("; ")
        )
    }
}

fn ctx(name: &'static str) -> impl FnOnce(hyptimes_core::Error) -> CliError {
    move |source| CliError::Experiment { experiment: name, source }
}

fn random_points(size: usize, seed: u64) -> Vec<CirclePoint> {
    EnsembleSpec::random(size, seed).points()
}

const ORACLE_A: [f64; 3] = [-1.0, -0.1, 0.1];
const ORACLE_R: [f64; 2] = [-2.0, 0.0];

fn oracle_case(code: u64, n: usize, delta: f64) -> OrbitTrace {
    let mut c = code;
    let mut a = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for _ in 0..n {
        a.push(ORACLE_A[(c % 3) as usize]);
        c /= 3;
        r.push(ORACLE_R[(c % 2) as usize]);
        c /= 2;
    }
    OrbitTrace::from_observables(a, r, delta).expect("valid synthetic trace")
}

/// Check 1: detect_fast and detect_brute agree on small-alphabet traces of length
/// at most 12 (exhaustive while the per-length quota allows, sampled
/// beyond) and on random real-valued traces.
pub fn oracle_equivalence(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let rc = &cfg.report;
    let base = cfg.params;
    let param_sets = [
        Ok(base),
        base.with_sigma((-1.0f64).exp()).and_then(|p| p.with_b(0.49f64.min(0.99 / (4.0 * p.beta())))),
        base.with_sigma(0.5),
    ]
    .into_iter()
    .collect::<hyptimes_core::Result<Vec<_>>>()
    .map_err(ctx("oracle"))?;
    let quota = (rc.oracle_cases / 12).max(1) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.derived_seed(1));
    let mut cases: Vec<(u64, usize)> = Vec::new();
    let mut exhaustive_up_to = 0;
    for n in 1..=12usize {
        let total = 6u64.pow(n as u32);
        if total <= quota {
            cases.extend((0..total).map(|c| (c, n)));
            exhaustive_up_to = n;
        } else {
            cases.extend((0..quota).map(|_| (rng.random_range(0..total), n)));
        }
    }
    let delta = base.delta();
    let mismatches_a: usize = cases
        .par_iter()
        .map(|&(code, n)| {
            let t = oracle_case(code, n, delta);
            param_sets
                .iter()
                .filter(|p| detect_fast(&t, p).unwrap() != detect_brute(&t, p).unwrap())
                .count()
        })
        .sum();
    let traces: Vec<OrbitTrace> = (0..rc.oracle_random_traces)
        .map(|_| {
            let a = (0..rc.oracle_random_length).map(|_| rng.random_range(-1.5..0.5)).collect();
            let r = (0..rc.oracle_random_length)
                .map(|_| if rng.random_bool(0.7) { 0.0 } else { rng.random_range(-8.0..0.0) })
                .collect();
            OrbitTrace::from_observables(a, r, delta).expect("valid synthetic trace")
        })
        .collect();
    let mismatches_b: usize = traces
        .par_iter()
        .map(|t| {
            param_sets
                .iter()
                .filter(|p| detect_fast(t, p).unwrap() != detect_brute(t, p).unwrap())
                .count()
        })
        .sum();
    Ok(CheckOutcome::from_conditions(
        1,
        "detector oracle equivalence",
        vec![
            Condition::at_most("small-alphabet mismatches", mismatches_a as f64, 0.0),
            Condition::at_most("random-trace mismatches", mismatches_b as f64, 0.0),
        ],
        json!({
            "small_alphabet_cases": cases.len(),
            "exhaustive_up_to_length": exhaustive_up_to,
            "random_traces": traces.len(),
            "random_length": rc.oracle_random_length,
            "parameter_sets": param_sets.len(),
        }),
    ))
}

/// Check 2: T_f 1 = 1 at uniform points.
pub fn transfer_identity(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let pts = random_points(cfg.report.transfer_points, cfg.derived_seed(2));
    let max_err = transfer_max_error(&pts)?;
    Ok(CheckOutcome::from_conditions(
        2,
        "transfer operator fixes constants",
        vec![Condition::at_most("max |T1 - 1|", max_err, 1e-12)],
        json!({ "points": pts.len() }),
    ))
}

pub(crate) fn transfer_max_error(pts: &[CirclePoint]) -> Result<f64> {
    let mut max_err: f64 = 0.0;
    for &x in pts.iter().filter(|x| x.coord() != -1.0) {
        let v = transfer_apply(&F, |_| 1.0, x).map_err(ctx("transfer"))?;
        max_err = max_err.max((v - 1.0).abs());
    }
    Ok(max_err)
}

/// Check 3: Exact-branch Ulam matrix fixes the uniform vector; its invariant
/// density is uniform.
pub fn lebesgue_invariance(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let k = cfg.report.ulam_k;
    let u = build_ulam_exact(&F, k).map_err(ctx("ulam"))?;
    let uniform = vec![1.0 / k as f64; k];
    let l1: f64 = u.left_apply(&uniform).iter().zip(&uniform).map(|(a, b)| (a - b).abs()).sum();
    let d = invariant_density(&u, cfg.ulam.tol, cfg.ulam.max_iters).map_err(ctx("ulam"))?;
    Ok(CheckOutcome::from_conditions(
        3,
        "Lebesgue invariance",
        vec![
            Condition::at_most("L1 |uP - u|", l1, 1e-10),
            Condition::at_most("sup |density - 1|", d.sup_deviation_from_uniform(), 0.02),
        ],
        json!({ "k": k, "nonzeros": u.nonzeros() }),
    ))
}

/// Check 4: The Lyapunov integral by quadrature and by ensemble Birkhoff averages.
pub fn lyapunov(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let rc = &cfg.report;
    let q = lyapunov_integral(&F, LyapunovMethod::Quadrature).map_err(ctx("lyapunov"))?;
    let e = lyapunov_integral(
        &F,
        LyapunovMethod::Ensemble {
            ensemble: EnsembleSpec::random(rc.lyapunov_points, cfg.derived_seed(4)),
            horizon: rc.lyapunov_horizon,
        },
    )
    .map_err(ctx("lyapunov"))?;
    Ok(CheckOutcome::from_conditions(
        4,
        "Lyapunov integral",
        vec![
            Condition::at_most("|quadrature + 1/2|", (q.value + 0.5).abs(), 1e-6),
            Condition::at_most("|ensemble + 1/2|", (e.value + 0.5).abs(), 0.02),
        ],
        json!({
            "quadrature": q.value,
            "ensemble": e.value,
            "ensemble_standard_error": e.error,
            "ensemble_dropped": e.dropped,
            "points": rc.lyapunov_points,
            "horizon": rc.lyapunov_horizon,
        }),
    ))
}

/// Check 5: Moments of -log dist(x, S).
pub fn log_moments(_cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let m1 = log_dist_moment(&F, 1.0, Truncation::None).map_err(ctx("moment"))?;
    let mut conditions = vec![Condition::at_most(
        "|p=1 moment - (1 + ln 2)|",
        (m1.value - (1.0 + std::f64::consts::LN_2)).abs(),
        1e-6,
    )];
    let mut values = vec![json!({ "p": 1, "value": m1.value, "last_change": m1.last_change })];
    for p in [2.0, 4.0, 8.0] {
        let m = log_dist_moment(&F, p, Truncation::None).map_err(ctx("moment"))?;
        let rel = m.last_change / m.value.abs().max(1.0);
        conditions.push(Condition::at_most(format!("p={p} refinement change"), rel, 1e-6));
        values.push(json!({ "p": p, "value": m.value, "last_change": m.last_change }));
    }
    Ok(CheckOutcome::from_conditions(5, "log-distance moments", conditions, json!({ "moments": values })))
}

/// Check 6: The recurrence-sequence checks for x1 = 1/4 and a 100-point grid.
pub fn recurrence_sequence_bounds(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let n = cfg.report.lemma51_n;
    let mut starts = vec![0.25];
    starts.extend(sweep_grid());
    let reports = lemma51_sweep(&starts, n).map_err(ctx("lemma51"))?;
    let per_n: u64 = reports.iter().map(|r| r.bound.failures + r.increment.failures + r.lower_bound.failures).sum();
    let partial: u64 = reports.iter().map(|r| r.harmonic.failures + r.monotone.failures).sum();
    let min_ratio = reports.iter().map(|r| r.final_ratio).fold(f64::INFINITY, f64::min);
    let canonical = &reports[0];
    Ok(CheckOutcome::from_conditions(
        6,
        "recurrence sequence bounds",
        vec![
            Condition::at_most("per-n failures", per_n as f64, 0.0),
            Condition::at_most("partial-sum failures", partial as f64, 0.0),
            Condition::at_least("min S_N / ln N", min_ratio, 1.0 / 16.0),
        ],
        json!({
            "starts": starts.len(),
            "n": n,
            "max_increment_error": reports.iter().map(|r| r.max_increment_error).fold(0.0, f64::max),
            "canonical_growth": canonical.growth,
        }),
    ))
}

/// Check 7: Truncated means of h keep growing; h ≡ 1 for the doubling map.
pub fn non_integrability(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let rc = &cfg.report;
    let pts = random_points(rc.firsttime_points, cfg.derived_seed(7));
    let dist = first_time_distribution(&F, &pts, &cfg.params, rc.firsttime_horizon).map_err(ctx("firsttime"))?;
    let schedule: Vec<usize> = [rc.firsttime_horizon / 100, rc.firsttime_horizon / 10, rc.firsttime_horizon].to_vec();
    let means: Vec<f64> = schedule.iter().map(|&n| dist.truncated_mean(n, CensorPolicy::IncludeAtHorizon)).collect();
    let doubling = cfg.params.with_sigma(0.5).map_err(ctx("firsttime"))?;
    let not_one = pts
        .iter()
        .map(|&x| hyptimes_core::hyptimes::first_hyperbolic_time(&DoublingBaselineMap, x, &doubling, 10))
        .filter(|h| !matches!(h, Ok(FirstTime::At(1))))
        .count();
    Ok(CheckOutcome::from_conditions(
        7,
        "first hyperbolic time not integrable",
        vec![
            Condition::at_least(format!("E[min(h,{})]/E[min(h,{})]", schedule[1], schedule[0]), means[1] / means[0], 1.1),
            Condition::at_least(format!("E[min(h,{})]/E[min(h,{})]", schedule[2], schedule[1]), means[2] / means[1], 1.1),
            Condition::at_most("doubling points with h != 1", not_one as f64, 0.0),
        ],
        json!({
            "schedule": schedule,
            "truncated_means": means,
            "censored": dist.censored,
            "dropped": dist.dropped,
            "sample_size": dist.sample_size,
        }),
    ))
}

/// Check 8: Most points have hyperbolic-time frequency at least θ.
pub fn positive_frequency(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let rc = &cfg.report;
    let pts = random_points(rc.frequency_points, cfg.derived_seed(8));
    let n = rc.frequency_horizon;
    let scans = scan_ensemble(&F, &pts, &cfg.params, &[n]);
    let mut freqs = Vec::with_capacity(scans.len());
    let mut dropped = 0;
    for s in scans {
        match s {
            Ok(s) => freqs.push(s.counts[0] as f64 / n as f64),
            Err(hyptimes_core::Error::OrbitHitExceptionalSet { .. }) => dropped += 1,
            Err(e) => return Err(ctx("frequency")(e)),
        }
    }
    let theta = cfg.detect.theta;
    // dropped points count against the criterion
    let fraction = freqs.iter().filter(|&&f| f >= theta).count() as f64 / pts.len() as f64;
    freqs.sort_by(f64::total_cmp);
    Ok(CheckOutcome::from_conditions(
        8,
        "positive frequency of hyperbolic times",
        vec![Condition::at_least(format!("fraction with frequency >= {theta}"), fraction, 0.95)],
        json!({
            "theta": theta,
            "horizon": n,
            "points": pts.len(),
            "dropped": dropped,
            "min_frequency": freqs.first(),
            "median_frequency": freqs.get(freqs.len() / 2),
        }),
    ))
}

/// Traces of length n for which n is a detected time, drawn from a seeded
/// stream of random points.
fn traces_with_time(n: usize, count: usize, params: &HyperbolicParams, seed: u64) -> Vec<OrbitTrace> {
    let mut out = Vec::with_capacity(count);
    let mut batch_seed = seed;
    let mut batches = 0;
    while out.len() < count && batches < 1000 {
        let pts = random_points(4 * count.max(8), batch_seed);
        let found: Vec<Option<OrbitTrace>> = pts
            .par_iter()
            .map(|&x| {
                let t = generate_orbit(&F, x, n, params.delta()).ok()?;
                detect_fast(&t, params).ok()?.contains(n).then_some(t)
            })
            .collect();
        out.extend(found.into_iter().flatten().take(count - out.len()));
        batch_seed = derive_seed(batch_seed, 1);
        batches += 1;
    }
    out
}

/// Check 9: Backward contraction and bounded distortion at detected times.
pub fn local_checks(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let rc = &cfg.report;
    let mut violations = 0;
    let mut max_c1: f64 = 1.0;
    let mut under_sampled = 0;
    let mut per_n = Vec::new();
    for (i, &n) in rc.local_times.iter().enumerate() {
        let traces = traces_with_time(n, rc.local_orbits, &cfg.params, cfg.derived_seed(90 + i as u64));
        let reports: Vec<_> = traces
            .par_iter()
            .map(|t| {
                let c = contraction_check(&F, t, n, &cfg.params, rc.local_pairs, DEFAULT_ARC_RADIUS)?;
                let d = distortion_check(&F, t, n, rc.local_pairs, DEFAULT_ARC_RADIUS)?;
                Ok((c, d))
            })
            .collect::<hyptimes_core::Result<Vec<_>>>()
            .map_err(ctx("local"))?;
        let v: usize = reports.iter().map(|(c, _)| c.violations).sum();
        let tested: usize = reports.iter().map(|(c, _)| c.pairs_tested).sum();
        let discarded: usize = reports.iter().map(|(c, _)| c.discarded).sum();
        let c1 = reports.iter().map(|(_, d)| d.c1).fold(1.0, f64::max);
        let ratio = reports.iter().map(|(c, _)| c.max_ratio).fold(0.0, f64::max);
        violations += v;
        max_c1 = max_c1.max(c1);
        if traces.len() < rc.local_orbits || tested == 0 {
            under_sampled += 1;
        }
        per_n.push(json!({
            "n": n, "orbits": traces.len(), "pairs_tested": tested, "discarded": discarded,
            "violations": v, "c1": c1, "max_contraction_ratio": ratio,
        }));
    }
    // the doubling map meets the bound with 2^{-k} <= 2^{-k/2}
    let half = cfg.params.with_sigma(0.5).map_err(ctx("local"))?;
    let t = generate_orbit(&DoublingBaselineMap, CirclePoint::new(0.3).expect("finite"), 50, half.delta())
        .map_err(ctx("local"))?;
    let dc = contraction_check(&DoublingBaselineMap, &t, 50, &half, rc.local_pairs, DEFAULT_ARC_RADIUS)
        .map_err(ctx("local"))?;
    Ok(CheckOutcome::from_conditions(
        9,
        "backward contraction and distortion",
        vec![
            Condition::at_most("contraction violations", (violations + dc.violations) as f64, 0.0),
            Condition::at_most("max empirical C1", max_c1, rc.distortion_pin),
            Condition::at_most("under-sampled times", under_sampled as f64, 0.0),
        ],
        json!({ "radius": DEFAULT_ARC_RADIUS, "per_time": per_n }),
    ))
}

/// Check 10: Sup of the restricted pushforward densities has bounded spread in n.
pub fn density_bound(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let rc = &cfg.report;
    let pts = random_points(rc.density_points, cfg.derived_seed(10));
    let r = pushforward_restricted_streaming(&F, &pts, &cfg.params, &rc.density_times, rc.density_k)
        .map_err(ctx("density"))?;
    let sups: Vec<f64> = r.densities.iter().map(|d| d.sup_density()).collect();
    let masses: Vec<f64> = r.densities.iter().map(|d| d.total_mass()).collect();
    let hi = sups.iter().copied().fold(0.0, f64::max);
    let lo = sups.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    Ok(CheckOutcome::from_conditions(
        10,
        "restricted pushforward density bound",
        vec![Condition::at_most("max/min sup density", spread, rc.density_spread)],
        json!({
            "n": rc.density_times, "sup_density": sups, "mass": masses,
            "k": rc.density_k, "points": r.sample_size, "dropped": r.dropped, "c2_estimate": hi,
        }),
    ))
}

/// Check 11: Two renderings of the same artifacts are byte-identical.
pub fn reproducibility(first: &[Artifact], second: &[Artifact]) -> CheckOutcome {
    let mismatched: Vec<&str> = first
        .iter()
        .zip(second)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.name.as_str())
        .collect();
    let count_mismatch = first.len() != second.len();
    CheckOutcome::from_conditions(
        11,
        "byte-identical reruns",
        vec![Condition::at_most(
            "differing artifacts",
            (mismatched.len() + count_mismatch as usize) as f64,
            0.0,
        )],
        json!({ "artifacts_compared": first.len().min(second.len()), "differing": mismatched }),
    )
}

/// Checks 1 to 10, in order.
pub type CheckFn = fn(&ExperimentConfig) -> Result<CheckOutcome>;

pub const CHECKS: [(u32, CheckFn); 10] = [
    (1, oracle_equivalence),
    (2, transfer_identity),
    (3, lebesgue_invariance),
    (4, lyapunov),
    (5, log_moments),
    (6, recurrence_sequence_bounds),
    (7, non_integrability),
    (8, positive_frequency),
    (9, local_checks),
    (10, density_bound),
];

/// Runs checks 1 to 10 and returns each outcome with its wall time.
pub fn run_checks(cfg: &ExperimentConfig) -> Result<Vec<(CheckOutcome, Duration)>> {
    CHECKS
        .iter()
        .map(|(_, check)| {
            let start = Instant::now();
            let outcome = check(cfg)?;
            Ok((outcome, start.elapsed()))
        })
        .collect()
}

/// Aligned text table of outcomes, one line per condition.
pub fn table(outcomes: &[CheckOutcome]) -> String {
    let label_width = outcomes
        .iter()
        .flat_map(|o| o.conditions.iter().map(|c| c.label.len()))
        .max()
        .unwrap_or(0);
    let name_width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for o in outcomes {
        for (i, c) in o.conditions.iter().enumerate() {
            let (id, name) = if i == 0 { (o.id.to_string(), o.name) } else { (String::new(), "") };
            let op = match c.comparison {
                Comparison::AtMost => "<=",
                Comparison::AtLeast => ">=",
            };
            out.push_str(&format!(
                "{id:>3}  {name:<name_width$}  {:<label_width$}  {:>14.6e} {op} {:<10.3e}  {}\n",
                c.label,
                c.measured,
                c.threshold,
                if c.passed { "pass" } else { "FAIL" },
            ));
        }
    }
    out
}
