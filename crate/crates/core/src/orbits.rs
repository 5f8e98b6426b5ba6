//! Orbit traces, ensembles and Birkhoff averages.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{CirclePoint, MapSystem, EXCEPTIONAL_GUARD};
use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;

/// δ-truncated distance to the exceptional set: dist(x, S) when it is at
/// most `delta`, and 1 otherwise (always 1 when S is empty).
pub fn dist_truncated(x: CirclePoint, map: &dyn MapSystem, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if map.exceptional_set().is_empty() {
        return Ok(1.0);
    }
    let d = map.dist_to_s(x);
    if d == 0.0 {
        return Err(Error::OnExceptionalSet { point: x.coord() });
    }
    Ok(if d <= delta { d } else { 1.0 })
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1], got {delta}")));
    }
    Ok(())
}

/// One step of an orbit: the point and its two observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitStep {
    pub x: CirclePoint,
    /// log ||Df(x)^{-1}||
    pub a: f64,
    /// log dist_δ(x, S)
    pub r: f64,
}

/// Lazily iterates an orbit, producing observables at each point.
pub struct OrbitStepper<'a> {
    map: &'a dyn MapSystem,
    x: CirclePoint,
    delta: f64,
    j: usize,
}

impl<'a> OrbitStepper<'a> {
    pub fn new(map: &'a dyn MapSystem, x0: CirclePoint, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self { map, x: x0, delta, j: 0 })
    }

    /// Index of the point the next call to [`step`](Self::step) observes.
    pub fn index(&self) -> usize {
        self.j
    }

    pub fn current(&self) -> CirclePoint {
        self.x
    }

    /// Observes the current point and advances the orbit.
    pub fn step(&mut self) -> Result<OrbitStep> {
        let x = self.x;
        let has_s = !self.map.exceptional_set().is_empty();
        let r = if has_s {
            let d = self.map.dist_to_s(x);
            if d < EXCEPTIONAL_GUARD {
                return Err(Error::OrbitHitExceptionalSet {
                    step: self.j,
                    point: x.coord(),
                    completed: self.j,
                });
            }
            if d <= self.delta {
                d.ln()
            } else {
                0.0
            }
        } else {
            0.0
        };
        let a = self.map.log_inv_deriv_norm(x);
        self.x = self.map.eval(x);
        self.j += 1;
        Ok(OrbitStep { x, a, r })
    }
}

/// An orbit x_0, ..., x_N together with a_j = log ||Df(x_j)^{-1}|| and
/// r_j = log dist_δ(x_j, S) for j < N.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTrace {
    x: Vec<CirclePoint>,
    a: Vec<f64>,
    r: Vec<f64>,
    delta: f64,
}

impl OrbitTrace {
    /// Builds a trace from observables alone, without orbit points. Used for
    /// synthetic traces; detection only needs the observables.
    pub fn from_observables(a: Vec<f64>, r: Vec<f64>, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        if a.len() != r.len() {
            return Err(Error::InvalidArgument(format!(
                "observable lengths differ: {} vs {}",
                a.len(),
                r.len()
            )));
        }
        if let Some(&v) = a.iter().chain(&r).find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(v));
        }
        if let Some(&v) = r.iter().find(|&&v| v > 0.0) {
            return Err(Error::InvalidArgument(format!("log truncated distance {v} is positive")));
        }
        Ok(Self { x: Vec::new(), a, r, delta })
    }

    /// Number of observed steps N.
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Orbit points x_0..=x_N; empty for synthetic traces.
    pub fn points(&self) -> &[CirclePoint] {
        &self.x
    }

    pub fn inv_deriv(&self) -> &[f64] {
        &self.a
    }

    pub fn log_dist(&self) -> &[f64] {
        &self.r
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn has_points(&self) -> bool {
        !self.x.is_empty()
    }

    /// The trace of f^n(x_0): observables from index n on.
    pub fn suffix(&self, n: usize) -> OrbitTrace {
        let n = n.min(self.len());
        OrbitTrace {
            x: if self.x.is_empty() { Vec::new() } else { self.x[n..].to_vec() },
            a: self.a[n..].to_vec(),
            r: self.r[n..].to_vec(),
            delta: self.delta,
        }
    }
}

/// Generates the trace of length `n` starting at `x0`.
///
/// Fails with [`Error::OrbitHitExceptionalSet`] when some x_j with j < n
/// lies within 1e-300 of S.
pub fn generate_orbit(map: &dyn MapSystem, x0: CirclePoint, n: usize, delta: f64) -> Result<OrbitTrace> {
    if n == 0 {
        return Err(Error::InvalidArgument("orbit length must be at least 1".into()));
    }
    let mut stepper = OrbitStepper::new(map, x0, delta)?;
    let mut x = Vec::with_capacity(n + 1);
    let mut a = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for _ in 0..n {
        let s = stepper.step()?;
        x.push(s.x);
        a.push(s.a);
        r.push(s.r);
    }
    x.push(stepper.current());
    Ok(OrbitTrace { x, a, r, delta })
}

/// Observable averaged by [`birkhoff_average`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    /// log ||Df^{-1}||
    InvDeriv,
    /// -log dist_δ(·, S)
    NegLogDist,
}

/// (1/n) Σ_{j<n} of the chosen observable, with compensated summation.
pub fn birkhoff_average(trace: &OrbitTrace, observable: Observable, n: usize) -> Result<f64> {
    if n == 0 || n > trace.len() {
        return Err(Error::InvalidArgument(format!(
            "averaging length {n} outside 1..={}",
            trace.len()
        )));
    }
    let acc: NeumaierSum = match observable {
        Observable::InvDeriv => trace.a[..n].iter().copied().collect(),
        Observable::NegLogDist => trace.r[..n].iter().map(|r| -r).collect(),
    };
    Ok(acc.value() / n as f64)
}

/// Birkhoff average of log ||Df^{-1}|| computed on the fly, without storing
/// a trace.
pub fn streaming_inv_deriv_average(map: &dyn MapSystem, x0: CirclePoint, n: usize) -> Result<f64> {
    let mut stepper = OrbitStepper::new(map, x0, 1.0)?;
    let mut acc = NeumaierSum::new();
    for _ in 0..n {
        acc.add(stepper.step()?.a);
    }
    Ok(acc.value() / n as f64)
}

/// How initial points are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingKind {
    /// Cell midpoints of an equal partition of [-1, 1).
    Grid,
    /// Uniform draws from a ChaCha8 generator seeded with `seed`.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: SamplingKind,
    pub size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn grid(size: usize) -> Self {
        Self { kind: SamplingKind::Grid, size, seed: 0 }
    }

    pub fn random(size: usize, seed: u64) -> Self {
        Self { kind: SamplingKind::Random, size, seed }
    }

    /// Initial points, in index order.
    pub fn points(&self) -> Vec<CirclePoint> {
        match self.kind {
            SamplingKind::Grid => (0..self.size)
                .map(|i| {
                    let x = -1.0 + 2.0 * (i as f64 + 0.5) / self.size as f64;
                    CirclePoint::from_coord_unchecked(x)
                })
                .collect(),
            SamplingKind::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                (0..self.size)
                    .map(|_| {
                        let u: f64 = rng.random();
                        CirclePoint::from_coord_unchecked(-1.0 + 2.0 * u)
                    })
                    .collect()
            }
        }
    }
}

/// Applies `f` to every initial point in parallel; the output is ordered by
/// point index whatever the completion order.
pub fn par_map_points<T, F>(points: &[CirclePoint], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, CirclePoint) -> T + Sync + Send,
{
    points
        .par_iter()
        .enumerate()
        .map(|(i, &x)| f(i, x))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DoublingBaselineMap, IntermittentCircleMap};
    use std::f64::consts::LN_2;

    fn p(x: f64) -> CirclePoint {
        CirclePoint::new(x).unwrap()
    }

    #[test]
    fn truncated_distance_examples() {
        let f = IntermittentCircleMap;
        assert_eq!(dist_truncated(p(0.05), &f, 0.1).unwrap(), 0.05);
        assert_eq!(dist_truncated(p(0.5), &f, 0.1).unwrap(), 1.0);
        assert_eq!(dist_truncated(p(0.5), &DoublingBaselineMap, 0.1).unwrap(), 1.0);
        assert!(matches!(
            dist_truncated(p(0.0), &f, 0.1),
            Err(Error::OnExceptionalSet { .. })
        ));
        assert!(dist_truncated(p(0.3), &f, 0.0).is_err());
        assert!(dist_truncated(p(0.3), &f, 1.5).is_err());
    }

    #[test]
    fn doubling_orbit_example() {
        let t = generate_orbit(&DoublingBaselineMap, p(0.1), 3, 0.1).unwrap();
        let xs: Vec<f64> = t.points().iter().map(|x| x.coord()).collect();
        assert_eq!(xs, vec![0.1, 0.2, 0.4, 0.8]);
        assert_eq!(t.inv_deriv(), &[-LN_2; 3]);
        assert_eq!(t.log_dist(), &[0.0; 3]);
    }

    #[test]
    fn intermittent_orbit_hits_exceptional_set() {
        let err = generate_orbit(&IntermittentCircleMap, p(0.25), 2, 0.1).unwrap_err();
        assert_eq!(
            err,
            Error::OrbitHitExceptionalSet { step: 1, point: 0.0, completed: 1 }
        );
        // the points themselves are well defined
        let f = IntermittentCircleMap;
        assert_eq!(f.eval(p(0.25)).coord(), 0.0);
        assert_eq!(f.eval(f.eval(p(0.25))).coord(), -1.0);
    }

    #[test]
    fn birkhoff_examples() {
        let t = generate_orbit(&DoublingBaselineMap, p(0.3), 50, 1.0).unwrap();
        for n in [1, 7, 50] {
            assert_eq!(birkhoff_average(&t, Observable::InvDeriv, n).unwrap(), -LN_2);
            assert_eq!(birkhoff_average(&t, Observable::NegLogDist, n).unwrap(), 0.0);
        }
        assert!(birkhoff_average(&t, Observable::InvDeriv, 51).is_err());
        assert!(birkhoff_average(&t, Observable::InvDeriv, 0).is_err());
    }

    #[test]
    fn ensembles_are_reproducible() {
        let a = EnsembleSpec::random(100, 7).points();
        let b = EnsembleSpec::random(100, 7).points();
        assert_eq!(a, b);
        assert_ne!(a, EnsembleSpec::random(100, 8).points());
        assert!(a.iter().all(|x| (-1.0..1.0).contains(&x.coord())));
        let g = EnsembleSpec::grid(4).points();
        assert_eq!(
            g.iter().map(|x| x.coord()).collect::<Vec<_>>(),
            vec![-0.75, -0.25, 0.25, 0.75]
        );
    }

    #[test]
    fn synthetic_trace_validation() {
        assert!(OrbitTrace::from_observables(vec![0.0], vec![0.0, 0.0], 0.1).is_err());
        assert!(OrbitTrace::from_observables(vec![f64::NAN], vec![0.0], 0.1).is_err());
        assert!(OrbitTrace::from_observables(vec![0.0], vec![0.5], 0.1).is_err());
        let t = OrbitTrace::from_observables(vec![-1.0, -2.0], vec![0.0, -1.0], 0.1).unwrap();
        assert_eq!(t.len(), 2);
        assert!(!t.has_points());
        assert_eq!(t.suffix(1).inv_deriv(), &[-2.0]);
    }
}
