//! The five named experiments. Each renders its artifacts in memory; the
//! caller writes them.

use hyptimes_core::analysis::lemma51::lemma51_verify;
use hyptimes_core::analysis::recurrence::halving_schedule;
use hyptimes_core::analysis::{
    birkhoff_negativity, contraction_check, distortion_check, log_dist_moment, lyapunov_integral,
    slow_recurrence_profile, tail_report, LyapunovMethod, Truncation, DEFAULT_ARC_RADIUS,
};
use hyptimes_core::dynamics::probe_nondegeneracy;
use hyptimes_core::hyptimes::{classify_sets, detect_fast, first_time_distribution, scan_ensemble, FrequencyReport};
use hyptimes_core::io::{density_csv, histogram_csv, times_csv, trace_csv, xy_csv, Csv, Field};
use hyptimes_core::measures::{build_ulam_exact, build_ulam_sampled, invariant_density};
use hyptimes_core::orbits::generate_orbit;
use hyptimes_core::{EnsembleSpec, Error, FirstTime, IntermittentCircleMap, MapKind, MapSystem, OrbitTrace};
use rayon::prelude::*;
use serde_json::json;

use crate::checks::{self, CheckOutcome, Condition};
use crate::config::{Experiment, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::output::Artifact;

/// Samples per cell for the sampled Ulam matrix of maps without exact
/// branch intersection.
const SAMPLED_ULAM_PER_CELL: usize = 64;
/// Longest n reported in the H_n / H_n^* table.
const SET_TABLE_MAX: usize = 50;
const PROBE_GRID: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub experiment: Experiment,
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<CheckOutcome>,
}

fn ctx(e: Experiment) -> impl Fn(Error) -> CliError {
    move |source| CliError::Experiment { experiment: e.name(), source }
}

/// Runs one experiment. `previous` holds the outputs of the experiments
/// already run, which `report` re-renders and compares.
pub fn run_experiment(cfg: &ExperimentConfig, e: Experiment, previous: &[ExperimentOutput]) -> Result<ExperimentOutput> {
    let (artifacts, checks) = match e {
        Experiment::Detect => (detect(cfg)?, Vec::new()),
        Experiment::Firsttime => (firsttime(cfg)?, Vec::new()),
        Experiment::Ulam => (ulam(cfg)?, Vec::new()),
        Experiment::Verify => verify(cfg)?,
        Experiment::Report => report(cfg, previous)?,
    };
    Ok(ExperimentOutput { experiment: e, artifacts, checks })
}

fn detect(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let e = Experiment::Detect;
    let map = cfg.map.system();
    let points = cfg.ensemble_spec().points();
    let horizons = cfg.detect_horizons();
    let scans = scan_ensemble(map, &points, &cfg.params, &horizons);

    let mut header = vec!["index".to_string(), "x0".into(), "status".into(), "first_time".into()];
    header.extend(horizons.iter().map(|n| format!("freq_{n}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut per_point = Csv::new(&header);
    let mut counts = Vec::new();
    let mut dropped = 0;
    let mut censored = 0;
    for (i, (s, x)) in scans.iter().zip(&points).enumerate() {
        let mut row: Vec<Field> = vec![i.into(), x.coord().into()];
        match s {
            Ok(s) => {
                match s.first {
                    FirstTime::At(h) => row.extend([Field::from("ok"), h.into()]),
                    FirstTime::Censored { .. } => {
                        censored += 1;
                        row.extend([Field::from("censored"), "".into()]);
                    }
                }
                row.extend(s.counts.iter().zip(&horizons).map(|(&c, &n)| Field::from(c as f64 / n as f64)));
                counts.push(s.counts.clone());
            }
            Err(Error::OrbitHitExceptionalSet { .. }) => {
                dropped += 1;
                row.extend([Field::from("hit_exceptional_set"), "".into()]);
                row.extend(horizons.iter().map(|_| Field::from(f64::NAN)));
            }
            Err(err) => return Err(ctx(e)(err.clone())),
        }
        per_point.row(row);
    }

    // points dropped at S count as not reaching any θ
    let thetas: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
    counts.extend((0..dropped).map(|_| vec![0; horizons.len()]));
    let freq = FrequencyReport::from_counts(counts, &horizons, &thetas);
    let top = horizons.len() - 1;
    let curve: Vec<(f64, f64)> = thetas.iter().zip(&freq.fractions).map(|(&t, f)| (t, f[top])).collect();
    let theta = cfg.detect.theta;
    let at_theta: Vec<f64> = {
        let report = FrequencyReport::from_counts(freq.counts.clone(), &horizons, &[theta]);
        report.fractions[0].clone()
    };

    let mut artifacts = vec![
        Artifact::csv("detect_points.csv", per_point),
        Artifact::csv("detect_frequency.csv", xy_csv("theta", "fraction", &curve)),
    ];

    let length = cfg.detect.trace_length.min(cfg.horizon);
    let traces: Vec<OrbitTrace> = points
        .par_iter()
        .map(|&x| generate_orbit(map, x, length, cfg.params.delta()).ok())
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let mut sets_json = serde_json::Value::Null;
    if let Some(example) = traces.first() {
        let times = detect_fast(example, &cfg.params).map_err(ctx(e))?;
        artifacts.push(Artifact::csv("detect_example_trace.csv", trace_csv(example)));
        artifacts.push(Artifact::csv("detect_example_times.csv", times_csv(&times)));
        let n_max = SET_TABLE_MAX.min(length);
        let sets = classify_sets(&traces, &cfg.params, n_max).map_err(ctx(e))?;
        let mut table = Csv::new(&["n", "h_n", "h_star_n"]);
        for n in 1..=n_max {
            table.row([n.into(), sets.h[n - 1].into(), sets.h_star[n - 1].into()]);
        }
        artifacts.push(Artifact::csv("detect_sets.csv", table));
        sets_json = json!({ "traces": sets.sample_size, "length": length, "censored_fraction": sets.censored_fraction });
    }

    artifacts.push(Artifact::json(
        "detect_summary.json",
        &json!({
            "map": cfg.map.name(),
            "points": points.len(),
            "horizons": horizons,
            "theta": theta,
            "fraction_with_frequency_at_least_theta": at_theta,
            "censored": censored,
            "dropped": dropped,
            "sets": sets_json,
        }),
    ));
    Ok(artifacts)
}

fn firsttime(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let e = Experiment::Firsttime;
    let points = cfg.ensemble_spec().points();
    let dist = first_time_distribution(cfg.map.system(), &points, &cfg.params, cfg.horizon).map_err(ctx(e))?;
    let tail = tail_report(&dist, cfg.derived_seed(20)).map_err(ctx(e))?;
    Ok(vec![
        Artifact::csv("firsttime_histogram.csv", histogram_csv(&dist)),
        Artifact::csv("firsttime_survival.csv", xy_csv("n", "survival", &tail.survival)),
        Artifact::csv("firsttime_truncated_means.csv", xy_csv("n", "truncated_mean", &tail.truncated_means)),
        Artifact::json(
            "firsttime_tail.json",
            &json!({
                "map": cfg.map.name(),
                "horizon": dist.horizon,
                "sample_size": dist.sample_size,
                "censored": dist.censored,
                "dropped": dist.dropped,
                "truncated_means": tail.truncated_means,
                "growth_ratios": tail.growth_ratios,
                "fit_window": tail.fit_window,
                "fit_points": tail.fit_points,
                "too_few_in_window": tail.too_few_in_window,
                "slope": tail.slope,
                "slope_ci": tail.slope_ci,
            }),
        ),
    ])
}

fn ulam(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let e = Experiment::Ulam;
    let k = cfg.ulam.k;
    let (u, method) = match cfg.map {
        MapKind::Intermittent => (build_ulam_exact(&IntermittentCircleMap, k).map_err(ctx(e))?, "exact"),
        MapKind::Doubling => (
            build_ulam_sampled(cfg.map.system(), k, SAMPLED_ULAM_PER_CELL, cfg.derived_seed(30)).map_err(ctx(e))?,
            "sampled",
        ),
    };
    let uniform = vec![1.0 / k as f64; k];
    let stationarity: f64 = u.left_apply(&uniform).iter().zip(&uniform).map(|(a, b)| (a - b).abs()).sum();
    let d = invariant_density(&u, cfg.ulam.tol, cfg.ulam.max_iters).map_err(ctx(e))?;
    Ok(vec![
        Artifact::csv("ulam_density.csv", density_csv(&d)),
        Artifact::json(
            "ulam_summary.json",
            &json!({
                "map": cfg.map.name(),
                "k": k,
                "method": method,
                "nonzeros": u.nonzeros(),
                "uniform_stationarity_l1": stationarity,
                "sup_deviation_from_uniform": d.sup_deviation_from_uniform(),
                "l1_from_uniform": d.l1_from_uniform(),
            }),
        ),
    ])
}

fn verify(cfg: &ExperimentConfig) -> Result<(Vec<Artifact>, Vec<CheckOutcome>)> {
    let e = Experiment::Verify;
    let err = ctx(e);
    let map = cfg.map.system();
    let vc = &cfg.verify;
    let intermittent = cfg.map == MapKind::Intermittent;
    let mut artifacts = Vec::new();
    let mut outcomes = Vec::new();

    let quad = lyapunov_integral(map, LyapunovMethod::Quadrature).map_err(&err)?;
    let ens = lyapunov_integral(
        map,
        LyapunovMethod::Ensemble {
            ensemble: EnsembleSpec::random(vc.lyapunov_points, cfg.derived_seed(40)),
            horizon: vc.lyapunov_horizon,
        },
    )
    .map_err(&err)?;
    let expected = if intermittent { -0.5 } else { -std::f64::consts::LN_2 };
    outcomes.push(CheckOutcome::from_conditions(
        101,
        "Lyapunov integral by quadrature",
        vec![Condition::at_most("|quadrature - expected|", (quad.value - expected).abs(), 1e-6)],
        json!({ "expected": expected }),
    ));

    let mut moments = Vec::new();
    for p in [1.0, 2.0, 4.0, 8.0] {
        let full = log_dist_moment(map, p, Truncation::None).map_err(&err)?;
        let trunc = log_dist_moment(map, p, Truncation::Delta(cfg.params.delta())).map_err(&err)?;
        moments.push(json!({ "p": p, "value": full.value, "last_change": full.last_change, "truncated": trunc.value }));
    }

    let mut lemma = serde_json::Value::Null;
    let mut transfer = serde_json::Value::Null;
    let mut nondegeneracy = serde_json::Value::Null;
    if intermittent {
        let r = lemma51_verify(0.25, vc.lemma51_n).map_err(&err)?;
        let mut growth = Csv::new(&["n", "s_n", "harmonic", "ratio_to_log"]);
        for g in &r.growth {
            growth.row([g.n.into(), g.s_n.into(), g.harmonic.into(), g.ratio_to_log.into()]);
        }
        artifacts.push(Artifact::csv("verify_lemma51_growth.csv", growth));
        let failures = r.bound.failures + r.increment.failures + r.lower_bound.failures + r.monotone.failures + r.harmonic.failures;
        outcomes.push(CheckOutcome::from_conditions(
            102,
            "recurrence sequence at x1 = 1/4",
            vec![Condition::at_most("failures", failures as f64, 0.0), Condition::at_least("S_N / ln N", r.final_ratio, 1.0 / 16.0)],
            json!({ "n": r.n }),
        ));
        lemma = json!({
            "x1": r.x1, "n": r.n, "bound": r.bound, "increment": r.increment, "lower_bound": r.lower_bound,
            "monotone": r.monotone, "harmonic": r.harmonic, "max_increment_error": r.max_increment_error,
            "final_ratio": r.final_ratio,
        });

        let pts = EnsembleSpec::random(vc.transfer_points, cfg.derived_seed(41)).points();
        let max_err = checks::transfer_max_error(&pts)?;
        outcomes.push(CheckOutcome::from_conditions(
            103,
            "transfer operator fixes constants",
            vec![Condition::at_most("max |T1 - 1|", max_err, 1e-12)],
            json!({ "points": pts.len() }),
        ));
        transfer = json!({ "points": pts.len(), "max_error": max_err });

        nondegeneracy = serde_json::to_value(probe_nondegeneracy(map, PROBE_GRID).map_err(&err)?).expect("serializable");
    }

    let (local, birkhoff) = local_and_birkhoff(cfg, map)?;
    outcomes.push(CheckOutcome::from_conditions(
        104,
        "backward contraction at detected times",
        vec![Condition::at_most("violations", local["violations"].as_f64().unwrap_or(f64::NAN), 0.0)],
        json!({ "orbits": vc.local_orbits, "length": vc.local_length }),
    ));

    let schedule = halving_schedule(vc.recurrence_delta0, vc.recurrence_levels);
    let rec_pts = EnsembleSpec::random(vc.recurrence_points, cfg.derived_seed(42)).points();
    let profile = slow_recurrence_profile(map, &rec_pts, &schedule, vc.recurrence_horizon).map_err(&err)?;
    let mut rec = Csv::new(&["k", "delta_k", "mean_phi", "max_phi", "mass", "bound"]);
    for l in &profile.levels {
        rec.row([l.k.into(), l.delta.into(), l.mean_phi.into(), l.max_phi.into(), l.mass.into(), l.bound.into()]);
    }
    artifacts.push(Artifact::csv("verify_slow_recurrence.csv", rec));

    artifacts.push(Artifact::json(
        "verify_summary.json",
        &json!({
            "map": cfg.map.name(),
            "lyapunov": {
                "quadrature": quad.value,
                "quadrature_error": quad.error,
                "ensemble": ens.value,
                "ensemble_standard_error": ens.error,
                "ensemble_dropped": ens.dropped,
            },
            "log_dist_moments": moments,
            "lemma51": lemma,
            "transfer_identity": transfer,
            "nondegeneracy": nondegeneracy,
            "local": local,
            "birkhoff": birkhoff,
            "slow_recurrence": profile,
            "checks": outcomes,
        }),
    ));
    Ok((artifacts, outcomes))
}

/// Contraction and distortion at every detected time of stored orbits, and
/// the Birkhoff averages at those times.
fn local_and_birkhoff(cfg: &ExperimentConfig, map: &dyn MapSystem) -> Result<(serde_json::Value, serde_json::Value)> {
    let err = ctx(Experiment::Verify);
    let vc = &cfg.verify;
    let points = EnsembleSpec::random(vc.local_orbits, cfg.derived_seed(43)).points();
    let traces: Vec<OrbitTrace> = points
        .iter()
        .filter_map(|&x| generate_orbit(map, x, vc.local_length, cfg.params.delta()).ok())
        .collect();
    let per_trace = traces
        .par_iter()
        .map(|t| -> hyptimes_core::Result<(usize, usize, usize, f64, f64)> {
            let times = detect_fast(t, &cfg.params)?;
            let (mut tested, mut violations, mut checked, mut ratio, mut c1) = (0, 0, 0, 0.0f64, 1.0f64);
            for &n in times.times() {
                let c = contraction_check(map, t, n, &cfg.params, vc.local_pairs, DEFAULT_ARC_RADIUS)?;
                let d = distortion_check(map, t, n, vc.local_pairs, DEFAULT_ARC_RADIUS)?;
                checked += 1;
                tested += c.pairs_tested;
                violations += c.violations;
                ratio = ratio.max(c.max_ratio);
                c1 = c1.max(d.c1);
            }
            Ok((checked, tested, violations, ratio, c1))
        })
        .collect::<hyptimes_core::Result<Vec<_>>>()
        .map_err(&err)?;
    let sum = |f: fn(&(usize, usize, usize, f64, f64)) -> usize| per_trace.iter().map(f).sum::<usize>();
    let local = json!({
        "orbits": traces.len(),
        "radius": DEFAULT_ARC_RADIUS,
        "times_checked": sum(|r| r.0),
        "pairs_tested": sum(|r| r.1),
        "violations": sum(|r| r.2),
        "max_contraction_ratio": per_trace.iter().map(|r| r.3).fold(0.0, f64::max),
        "c1": per_trace.iter().map(|r| r.4).fold(1.0, f64::max),
    });
    let b = birkhoff_negativity(&traces, &cfg.params).map_err(&err)?;
    let birkhoff = json!({
        "log_sigma": b.log_sigma,
        "fraction_negative": b.fraction_negative(),
        "censored": b.censored,
        "violations": b.violations,
    });
    Ok((local, birkhoff))
}

fn report(cfg: &ExperimentConfig, previous: &[ExperimentOutput]) -> Result<(Vec<Artifact>, Vec<CheckOutcome>)> {
    let mut outcomes: Vec<CheckOutcome> = checks::run_checks(cfg)?.into_iter().map(|(o, _)| o).collect();
    if cfg.report.check_reproducibility {
        let mut targets: Vec<Experiment> =
            cfg.experiments.iter().copied().filter(|&x| x != Experiment::Report).collect();
        targets.dedup();
        if targets.is_empty() {
            targets.push(Experiment::Firsttime);
        }
        let mut first = Vec::new();
        let mut second = Vec::new();
        for &t in &targets {
            match previous.iter().find(|o| o.experiment == t) {
                Some(o) => first.extend(o.artifacts.iter().cloned()),
                None => first.extend(run_experiment(cfg, t, &[])?.artifacts),
            }
            second.extend(run_experiment(cfg, t, &[])?.artifacts);
        }
        outcomes.push(checks::reproducibility(&first, &second));
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    let artifacts = vec![
        Artifact::json(
            "report.json",
            &json!({
                "map": cfg.map.name(),
                "seed": cfg.seed,
                "params": cfg.params,
                "passed": passed,
                "failed": outcomes.len() - passed,
                "criteria": outcomes,
            }),
        ),
        Artifact::text("report.txt", checks::table(&outcomes)),
    ];
    Ok((artifacts, outcomes))
}
