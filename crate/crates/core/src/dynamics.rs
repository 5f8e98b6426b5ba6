//! Circle model, the map contract, and the concrete example maps.
//!
//! The circle is the interval [-1, 1] with -1 identified with 1, so it has
//! circumference 2 and geodesic distances lie in [0, 1]. Normalised Lebesgue
//! measure has density 1/2 with respect to coordinate length.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Length of the circle in coordinate units.
pub const CIRCUMFERENCE: f64 = 2.0;

/// Points closer than this to the exceptional set abort orbit generation.
pub const EXCEPTIONAL_GUARD: f64 = 1e-300;

/// A point of the circle, stored as its representative in [-1, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CirclePoint(f64);

impl CirclePoint {
    /// Wraps any finite real onto the circle.
    pub fn new(x: f64) -> Result<Self> {
        wrap(x)
    }

    /// Builds a point from a coordinate already known to lie in [-1, 1).
    pub(crate) const fn from_coord_unchecked(x: f64) -> Self {
        CirclePoint(x)
    }

    pub fn coord(self) -> f64 {
        self.0
    }

    /// Geodesic distance, in [0, 1].
    pub fn distance(self, other: CirclePoint) -> f64 {
        geodesic(self.0, other.0)
    }
}

impl fmt::Display for CirclePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Returns the representative of `x` in [-1, 1).
pub fn wrap(x: f64) -> Result<CirclePoint> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    Ok(CirclePoint(wrap_coord(x)))
}

#[inline]
pub(crate) fn wrap_coord(x: f64) -> f64 {
    if (-1.0..1.0).contains(&x) {
        return x;
    }
    let mut y = x - CIRCUMFERENCE * ((x + 1.0) / CIRCUMFERENCE).floor();
    if y >= 1.0 {
        y -= CIRCUMFERENCE;
    }
    if y < -1.0 {
        y += CIRCUMFERENCE;
    }
    y
}

#[inline]
pub(crate) fn geodesic(x: f64, y: f64) -> f64 {
    let d = (x - y).abs();
    d.min(CIRCUMFERENCE - d)
}

/// The contract every dynamical example satisfies: a circle map that is a
/// local diffeomorphism away from a finite exceptional set, together with the
/// observables hyperbolic-time detection needs.
pub trait MapSystem: Send + Sync {
    fn name(&self) -> &'static str;

    fn eval(&self, x: CirclePoint) -> CirclePoint;

    /// log ||Df(x)^{-1}||, which in dimension one is -log |f'(x)|.
    fn log_inv_deriv_norm(&self, x: CirclePoint) -> f64;

    /// log |det Df(x)| = log |f'(x)|.
    fn log_abs_det(&self, x: CirclePoint) -> f64 {
        -self.log_inv_deriv_norm(x)
    }

    fn exceptional_set(&self) -> &[CirclePoint];

    /// Geodesic distance to the exceptional set; 1 by convention when the set
    /// is empty.
    fn dist_to_s(&self, x: CirclePoint) -> f64 {
        self.exceptional_set()
            .iter()
            .map(|s| s.distance(x))
            .fold(1.0, f64::min)
    }

    /// Pulls the pair (y, y - gap) back through the inverse branch whose image
    /// chart contains `anchor`'s image, returning the preimage of `y` and the
    /// preimage gap. `y` is an unwrapped coordinate close to `f(anchor)`.
    /// Returns `None` when the pair leaves the branch domain.
    fn pull_back(&self, _anchor: CirclePoint, _y: f64, _gap: f64) -> Option<(f64, f64)> {
        None
    }

    /// log |f'(y)| - log |f'(y - gap)|, for `y` an unwrapped coordinate.
    fn log_abs_det_gap(&self, y: f64, gap: f64) -> f64 {
        self.log_abs_det(CirclePoint(wrap_coord(y))) - self.log_abs_det(CirclePoint(wrap_coord(y - gap)))
    }
}

/// The intermittent circle map
/// x -> 2 sqrt(x) - 1 for x >= 0 and x -> 1 - 2 sqrt(|x|) for x < 0.
///
/// f'(x) = |x|^{-1/2}: the derivative blows up at 0 and equals one at the
/// neutral fixed point ±1. The exceptional set is {0, ±1}.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntermittentCircleMap;

const INTERMITTENT_S: [CirclePoint; 2] = [
    CirclePoint::from_coord_unchecked(0.0),
    CirclePoint::from_coord_unchecked(-1.0),
];

impl IntermittentCircleMap {
    /// Canonical exponent of the power-law behaviour near the exceptional set.
    pub const BETA: f64 = 0.5;

    /// The two inverse branches (g1(x), g2(x)) with g1: (-1,1) -> (0,1) and
    /// g2: (-1,1) -> (-1,0).
    pub fn inverse_branches(&self, x: CirclePoint) -> Result<(CirclePoint, CirclePoint)> {
        let x = x.coord();
        if x == -1.0 {
            return Err(Error::BranchBoundary { point: x });
        }
        Ok((CirclePoint(g1(x)), CirclePoint(g2(x))))
    }

    /// 1/|f'(z)| = sqrt(|z|).
    pub fn inverse_jacobian(&self, z: CirclePoint) -> f64 {
        z.coord().abs().sqrt()
    }
}

#[inline]
pub(crate) fn g1(x: f64) -> f64 {
    let h = 0.5 * (1.0 + x);
    h * h
}

#[inline]
pub(crate) fn g2(x: f64) -> f64 {
    let h = 0.5 * (1.0 - x);
    -(h * h)
}

#[inline]
fn intermittent_coord(x: f64) -> f64 {
    let y = if x >= 0.0 {
        2.0 * x.sqrt() - 1.0
    } else {
        1.0 - 2.0 * (-x).sqrt()
    };
    if y >= 1.0 {
        y - CIRCUMFERENCE
    } else {
        y
    }
}

impl MapSystem for IntermittentCircleMap {
    fn name(&self) -> &'static str {
        "intermittent"
    }

    fn eval(&self, x: CirclePoint) -> CirclePoint {
        CirclePoint(intermittent_coord(x.0))
    }

    fn log_inv_deriv_norm(&self, x: CirclePoint) -> f64 {
        let ax = x.0.abs();
        if ax > 0.5 {
            // 1 - |x| is exact here, and ln_1p keeps the tiny values near ±1
            0.5 * (-(1.0 - ax)).ln_1p()
        } else {
            0.5 * ax.ln()
        }
    }

    fn exceptional_set(&self) -> &[CirclePoint] {
        &INTERMITTENT_S
    }

    fn dist_to_s(&self, x: CirclePoint) -> f64 {
        let ax = x.0.abs();
        ax.min(1.0 - ax)
    }

    fn pull_back(&self, anchor: CirclePoint, y: f64, gap: f64) -> Option<(f64, f64)> {
        let z = y - gap;
        let open = |v: f64| v > -1.0 && v < 1.0;
        if !open(y) || !open(z) {
            return None;
        }
        if anchor.0 >= 0.0 {
            Some((g1(y), gap * (2.0 + y + z) / 4.0))
        } else {
            Some((g2(y), gap * (2.0 - y - z) / 4.0))
        }
    }

    fn log_abs_det_gap(&self, y: f64, gap: f64) -> f64 {
        // log|f'(y)| - log|f'(z)| = (log|z| - log|y|)/2 = ln(1 - gap/y)/2
        0.5 * (-gap / y).ln_1p()
    }
}

/// The doubling map x -> 2x on the circle of circumference 2. Uniformly
/// expanding with empty exceptional set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DoublingBaselineMap;

impl MapSystem for DoublingBaselineMap {
    fn name(&self) -> &'static str {
        "doubling"
    }

    fn eval(&self, x: CirclePoint) -> CirclePoint {
        CirclePoint(wrap_coord(2.0 * x.0))
    }

    fn log_inv_deriv_norm(&self, _x: CirclePoint) -> f64 {
        -std::f64::consts::LN_2
    }

    fn exceptional_set(&self) -> &[CirclePoint] {
        &[]
    }

    fn dist_to_s(&self, _x: CirclePoint) -> f64 {
        1.0
    }

    fn pull_back(&self, anchor: CirclePoint, y: f64, gap: f64) -> Option<(f64, f64)> {
        let half = 0.5 * y;
        let best = [-1.0, 0.0, 1.0]
            .into_iter()
            .map(|shift| half + shift)
            .min_by(|p, q| (p - anchor.0).abs().total_cmp(&(q - anchor.0).abs()))?;
        Some((best, 0.5 * gap))
    }

    fn log_abs_det_gap(&self, _y: f64, _gap: f64) -> f64 {
        0.0
    }
}

/// Map selection by name, as used in experiment configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Intermittent,
    Doubling,
}

impl MapKind {
    pub fn system(self) -> &'static dyn MapSystem {
        match self {
            MapKind::Intermittent => &IntermittentCircleMap,
            MapKind::Doubling => &DoublingBaselineMap,
        }
    }

    pub fn name(self) -> &'static str {
        self.system().name()
    }
}

impl FromStr for MapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intermittent" => Ok(MapKind::Intermittent),
            "doubling" => Ok(MapKind::Doubling),
            other => Err(Error::InvalidArgument(format!("unknown map {other:?}"))),
        }
    }
}

/// Empirical constants of the non-degeneracy conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonDegeneracyEstimate {
    /// Smallest B making all three conditions hold on the grid at `beta_hat`.
    pub b_hat: f64,
    /// Largest local power-law exponent of |f'| against the distance to S.
    pub beta_hat: f64,
    /// sup |log ||Df^{-1}||| / |log dist(x, S)| over the grid.
    pub zeta_hat: f64,
    /// Largest local exponent of the Lipschitz ratios of log ||Df^{-1}||.
    /// For maps with a power singularity this is 1, larger than `beta_hat`;
    /// the finite-grid `b_hat` absorbs the difference.
    pub lipschitz_exponent: f64,
    pub grid_size: usize,
    /// Worst relative slack of the two-sided power bound and of the two
    /// Lipschitz bounds. Non-negative when the fitted constants hold.
    pub residuals: [f64; 3],
}

struct Probe {
    dist: f64,
    log_deriv: f64,
    log_inv: f64,
    // (pair distance, |Δ log||Df^{-1}|||, |Δ log|det Df||)
    pairs: Vec<(f64, f64, f64)>,
}

/// Probes the non-degeneracy conditions on a logarithmic grid of
/// `grid_size` distances in [1e-12, 0.25] on each side of every point of S.
/// Pair offsets are a quarter of the distance to S.
pub fn probe_nondegeneracy(map: &dyn MapSystem, grid_size: usize) -> Result<NonDegeneracyEstimate> {
    if map.exceptional_set().is_empty() {
        return Err(Error::EmptyExceptionalSet(map.name()));
    }
    if grid_size < 2 {
        return Err(Error::InvalidArgument("grid_size must be at least 2".into()));
    }
    let (lo, hi) = (1e-12f64.ln(), 0.25f64.ln());
    let distances: Vec<f64> = (0..grid_size)
        .map(|i| (lo + (hi - lo) * i as f64 / (grid_size - 1) as f64).exp())
        .collect();

    let mut branches: Vec<Vec<Probe>> = Vec::new();
    for s in map.exceptional_set() {
        for side in [-1.0, 1.0] {
            let mut probes = Vec::new();
            for &d in &distances {
                let x = CirclePoint(wrap_coord(s.0 + side * d));
                let dist = map.dist_to_s(x);
                if dist <= 0.0 || (dist - d).abs() > 1e-9 * d.max(1e-300) + 1e-15 {
                    continue;
                }
                let mut pairs = Vec::with_capacity(2);
                for dir in [-1.0, 1.0] {
                    let y = CirclePoint(wrap_coord(x.0 + dir * dist / 4.0));
                    if map.dist_to_s(y) <= 0.0 {
                        continue;
                    }
                    pairs.push((
                        x.distance(y),
                        (map.log_inv_deriv_norm(x) - map.log_inv_deriv_norm(y)).abs(),
                        (map.log_abs_det(x) - map.log_abs_det(y)).abs(),
                    ));
                }
                probes.push(Probe {
                    dist,
                    log_deriv: map.log_abs_det(x),
                    log_inv: map.log_inv_deriv_norm(x),
                    pairs,
                });
            }
            if probes.len() >= 2 {
                branches.push(probes);
            }
        }
    }
    if branches.is_empty() {
        return Err(Error::EmptyGrid);
    }

    let mut beta_hat: f64 = 0.0;
    let mut lipschitz_exponent: f64 = 0.0;
    let mut zeta_hat: f64 = 0.0;
    for probes in &branches {
        for w in probes.windows(2) {
            let dl = (w[1].dist.ln() - w[0].dist.ln()).abs();
            if dl == 0.0 {
                continue;
            }
            beta_hat = beta_hat.max((w[1].log_deriv - w[0].log_deriv).abs() / dl);
            let q = |p: &Probe| {
                p.pairs
                    .iter()
                    .map(|&(dxy, da, _)| da / dxy)
                    .fold(0.0, f64::max)
            };
            let (q0, q1) = (q(&w[0]), q(&w[1]));
            if q0 > 0.0 && q1 > 0.0 {
                lipschitz_exponent = lipschitz_exponent.max((q1.ln() - q0.ln()).abs() / dl);
            }
        }
        for p in probes {
            zeta_hat = zeta_hat.max(p.log_inv.abs() / p.dist.ln().abs());
        }
    }
    let beta_hat = beta_hat.max(f64::MIN_POSITIVE);

    // Smallest B for this beta, in log form for the power bound.
    let mut log_b: f64 = 0.0;
    let mut lip_b: f64 = 0.0;
    for p in branches.iter().flatten() {
        let ld = p.dist.ln();
        log_b = log_b.max(p.log_deriv + beta_hat * ld);
        log_b = log_b.max(beta_hat * ld - p.log_deriv);
        for &(dxy, da, dj) in &p.pairs {
            let scale = p.dist.powf(beta_hat) / dxy;
            lip_b = lip_b.max(da * scale).max(dj * scale);
        }
    }
    let b_hat = log_b.exp().max(lip_b).max(1.0) * (1.0 + 1e-9);

    let mut residuals = [f64::INFINITY; 3];
    let lb = b_hat.ln();
    for p in branches.iter().flatten() {
        let ld = p.dist.ln();
        let upper = lb - beta_hat * ld;
        let lower = beta_hat * ld - lb;
        residuals[0] = residuals[0]
            .min((upper - p.log_deriv) / upper.abs().max(1.0))
            .min((p.log_deriv - lower) / lower.abs().max(1.0));
        for &(dxy, da, dj) in &p.pairs {
            let bound = b_hat * dxy / p.dist.powf(beta_hat);
            residuals[1] = residuals[1].min((bound - da) / bound);
            residuals[2] = residuals[2].min((bound - dj) / bound);
        }
    }

    Ok(NonDegeneracyEstimate {
        b_hat,
        beta_hat,
        zeta_hat,
        lipschitz_exponent,
        grid_size,
        residuals,
    })
}
