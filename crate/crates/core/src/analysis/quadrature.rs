//! Integrals over the circle with logarithmic singularities at points of S.
//!
//! The circle is cut at each point of S and at the midpoints between
//! consecutive points, so every piece has exactly one singular endpoint. On a
//! piece of length L the distance u to the singularity is covered by
//! geometric cells [L 2^{-(m+1)}, L 2^{-m}] with Gauss-Legendre on each, and
//! the innermost cell [0, ε] is integrated in closed form.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::dynamics::{CirclePoint, MapSystem};
use crate::error::{Error, Result};
use crate::numeric::{GaussLegendre, NeumaierSum};
use crate::orbits::{par_map_points, streaming_inv_deriv_average, EnsembleSpec};

const BASE_LEVELS: usize = 40;
const MAX_REFINEMENTS: usize = 8;
/// Successive refinements closer than this are accepted as converged.
pub const CAUCHY_TOLERANCE: f64 = 1e-12;

/// Outcome of a Cauchy-converged refinement sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    /// |I_r - I_{r-1}| at the accepted refinement.
    pub last_change: f64,
    pub refinements: usize,
}

/// A piece [s, s ± L] of the circle with its singular endpoint s.
#[derive(Debug, Clone, Copy)]
struct Piece {
    s: f64,
    direction: f64,
    length: f64,
}

fn pieces(map: &dyn MapSystem) -> Vec<Piece> {
    let mut s: Vec<f64> = map.exceptional_set().iter().map(|p| p.coord()).collect();
    s.sort_by(f64::total_cmp);
    s.dedup();
    let mut out = Vec::with_capacity(2 * s.len());
    for (i, &a) in s.iter().enumerate() {
        let b = if i + 1 < s.len() { s[i + 1] } else { s[0] + 2.0 };
        let half = 0.5 * (b - a);
        out.push(Piece { s: a, direction: 1.0, length: half });
        out.push(Piece { s: b, direction: -1.0, length: half });
    }
    out
}

/// ∫ over u in [0, L] of `g(u)`, with `inner(ε)` giving the integral over
/// [0, ε].
fn graded(
    g: &dyn Fn(f64) -> f64,
    inner: &dyn Fn(f64) -> f64,
    length: f64,
    levels: usize,
    subdivisions: usize,
    rule: &GaussLegendre,
) -> f64 {
    let mut acc = NeumaierSum::new();
    let mut hi = length;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        let w = (hi - lo) / subdivisions as f64;
        for s in 0..subdivisions {
            let a = lo + w * s as f64;
            acc.add(rule.integrate(a, a + w, g));
        }
        hi = lo;
    }
    acc.add(inner(hi));
    acc.value()
}

/// Repeats `integral(refinement)` until two successive values agree.
fn cauchy(integral: impl Fn(usize) -> f64) -> Result<QuadratureResult> {
    let mut previous = integral(0);
    for r in 1..=MAX_REFINEMENTS {
        let last = integral(r);
        if !last.is_finite() {
            return Err(Error::QuadratureDiverged { previous, last });
        }
        let change = (last - previous).abs();
        if change <= CAUCHY_TOLERANCE * last.abs().max(1.0) {
            return Ok(QuadratureResult { value: last, last_change: change, refinements: r });
        }
        previous = last;
    }
    Err(Error::QuadratureDiverged { previous, last: integral(MAX_REFINEMENTS) })
}

/// ∫ log ||Df^{-1}|| dm over the circle, m normalized Lebesgue.
///
/// The innermost cell fits α + β log u from two samples, which is exact for
/// the intermittent map and harmless where the integrand is smooth.
pub fn lyapunov_quadrature(map: &dyn MapSystem) -> Result<QuadratureResult> {
    let a = |x: f64| map.log_inv_deriv_norm(CirclePoint::new(x).expect("finite coordinate"));
    let pcs = pieces(map);
    if pcs.is_empty() {
        return cauchy(|r| {
            let rule = GaussLegendre::new(8 << r.min(3));
            0.5 * rule.integrate(-1.0, 1.0, a)
        });
    }
    let rule = GaussLegendre::new(8);
    cauchy(|r| {
        let levels = BASE_LEVELS + 10 * r;
        let subdivisions = 1 << r;
        let mut acc = NeumaierSum::new();
        for p in &pcs {
            let g = |u: f64| a(p.s + p.direction * u);
            let inner = |eps: f64| {
                let (u1, u2) = (eps, 0.5 * eps);
                let beta = (g(u1) - g(u2)) / std::f64::consts::LN_2;
                let alpha = g(u1) - beta * u1.ln();
                alpha * eps + beta * (eps * eps.ln() - eps)
            };
            acc.add(graded(&g, &inner, p.length, levels, subdivisions, &rule));
        }
        // dm = dx / 2 on the circle of circumference 2
        0.5 * acc.value()
    })
}

/// Whether the moment integrand is the raw distance or its δ-truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truncation {
    None,
    Delta(f64),
}

/// ∫ |log dist_δ(x, S)|^p dm.
///
/// Near each point of S the distance equals u, so the innermost cell is the
/// incomplete gamma value ∫_0^ε (-log u)^p du = Γ(p + 1, -log ε).
pub fn log_dist_moment(map: &dyn MapSystem, p: f64, truncation: Truncation) -> Result<QuadratureResult> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("moment order p = {p} must be >= 1")));
    }
    let delta = match truncation {
        Truncation::None => f64::INFINITY,
        Truncation::Delta(d) if d > 0.0 && d <= 1.0 => d,
        Truncation::Delta(d) => return Err(Error::InvalidArgument(format!("delta = {d} must lie in (0, 1]"))),
    };
    let pcs = pieces(map);
    if pcs.is_empty() {
        return Ok(QuadratureResult { value: 0.0, last_change: 0.0, refinements: 0 });
    }
    let rule = GaussLegendre::new(8);
    let upper_gamma = |eps: f64| gamma_ur(p + 1.0, -eps.ln()) * gamma(p + 1.0);
    cauchy(|r| {
        let levels = BASE_LEVELS + 10 * r;
        let subdivisions = 1 << r;
        let mut acc = NeumaierSum::new();
        for piece in &pcs {
            // pieces end halfway to the next point of S, so dist(x, S) = u
            // on each; using u directly avoids cancellation in the coordinate
            let g = |u: f64| (-u.ln()).powf(p);
            acc.add(graded(&g, &upper_gamma, piece.length.min(delta), levels, subdivisions, &rule));
        }
        0.5 * acc.value()
    })
}

/// How [`lyapunov_integral`] evaluates the integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "method")]
pub enum LyapunovMethod {
    Quadrature,
    Ensemble { ensemble: EnsembleSpec, horizon: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub value: f64,
    /// Standard error of the ensemble mean; refinement change for quadrature.
    pub error: f64,
    /// Points whose orbits hit S, excluded from the ensemble mean.
    pub dropped: usize,
}

/// ∫ log ||Df^{-1}|| dm, by quadrature or as the ensemble mean of finite
/// Birkhoff averages.
pub fn lyapunov_integral(map: &dyn MapSystem, method: LyapunovMethod) -> Result<LyapunovEstimate> {
    match method {
        LyapunovMethod::Quadrature => {
            let q = lyapunov_quadrature(map)?;
            Ok(LyapunovEstimate { value: q.value, error: q.last_change, dropped: 0 })
        }
        LyapunovMethod::Ensemble { ensemble, horizon } => {
            let points = ensemble.points();
            let averages = par_map_points(&points, |_, x| streaming_inv_deriv_average(map, x, horizon));
            let mut kept = Vec::with_capacity(averages.len());
            let mut dropped = 0;
            for a in averages {
                match a {
                    Ok(v) => kept.push(v),
                    Err(Error::OrbitHitExceptionalSet { .. }) => dropped += 1,
                    Err(e) => return Err(e),
                }
            }
            if kept.len() < 2 {
                return Err(Error::InvalidArgument("ensemble needs at least two usable points".into()));
            }
            let n = kept.len() as f64;
            let mean = kept.iter().copied().collect::<NeumaierSum>().value() / n;
            let var = kept.iter().map(|v| (v - mean) * (v - mean)).collect::<NeumaierSum>().value() / (n - 1.0);
            Ok(LyapunovEstimate { value: mean, error: (var / n).sqrt(), dropped })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DoublingBaselineMap, IntermittentCircleMap};

    /// 2 ∫_0^{1/2} (-ln x)^p dx for integer p, via the antiderivative
    /// ∫_0^t (-ln x)^p dx = p! t Σ_{k<=p} (-ln t)^k / k!.
    fn moment_oracle(p: u32) -> f64 {
        let l = std::f64::consts::LN_2;
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 0..=p {
            if k > 0 {
                term *= l / k as f64;
            }
            sum += term;
        }
        let fact: f64 = (1..=p).map(f64::from).product();
        2.0 * fact * 0.5 * sum
    }

    #[test]
    fn lyapunov_values() {
        let q = lyapunov_quadrature(&IntermittentCircleMap).unwrap();
        assert!((q.value + 0.5).abs() <= 1e-6, "{q:?}");
        assert!(q.last_change < 1e-8);
        let d = lyapunov_quadrature(&DoublingBaselineMap).unwrap();
        assert!((d.value + std::f64::consts::LN_2).abs() <= 1e-15);
    }

    #[test]
    fn moments_match_closed_forms() {
        let m1 = log_dist_moment(&IntermittentCircleMap, 1.0, Truncation::None).unwrap();
        assert!((m1.value - (1.0 + std::f64::consts::LN_2)).abs() <= 1e-6);
        assert!((moment_oracle(1) - (1.0 + std::f64::consts::LN_2)).abs() < 1e-15);
        for p in [2, 4, 8] {
            let m = log_dist_moment(&IntermittentCircleMap, p as f64, Truncation::None).unwrap();
            let oracle = moment_oracle(p);
            assert!((m.value - oracle).abs() <= 1e-6 * oracle, "p = {p}: {} vs {oracle}", m.value);
        }
        let t = log_dist_moment(&IntermittentCircleMap, 1.0, Truncation::Delta(1.0)).unwrap();
        assert_eq!(t.value, m1.value);
    }

    #[test]
    fn truncated_moment() {
        // 4 ∫_0^δ (-ln u) du / 2 = 2 δ (1 - ln δ)
        let d: f64 = 0.1;
        let m = log_dist_moment(&IntermittentCircleMap, 1.0, Truncation::Delta(d)).unwrap();
        assert!((m.value - 2.0 * d * (1.0 - d.ln())).abs() < 1e-9);
        assert_eq!(log_dist_moment(&DoublingBaselineMap, 2.0, Truncation::None).unwrap().value, 0.0);
        assert!(log_dist_moment(&IntermittentCircleMap, 0.5, Truncation::None).is_err());
    }

    #[test]
    fn ensemble_proxy_small() {
        let e = lyapunov_integral(
            &DoublingBaselineMap,
            LyapunovMethod::Ensemble { ensemble: EnsembleSpec::random(16, 1), horizon: 100 },
        )
        .unwrap();
        assert!((e.value + std::f64::consts::LN_2).abs() < 1e-12);
        let e = lyapunov_integral(
            &IntermittentCircleMap,
            LyapunovMethod::Ensemble { ensemble: EnsembleSpec::random(2000, 2), horizon: 1000 },
        )
        .unwrap();
        assert!((e.value + 0.5).abs() < 0.05, "{e:?}");
    }
}
