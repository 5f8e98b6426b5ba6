//! Transfer operators, Ulam discretizations and empirical densities.
//!
//! Partitions are K equal-length arcs of [-1, 1); cell i is
//! [-1 + 2i/K, -1 + 2(i+1)/K). Densities are reported against normalized
//! Lebesgue measure, so the uniform probability has density 1 in every cell.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{g1, g2, CirclePoint, IntermittentCircleMap, MapSystem};
use crate::error::{Error, Result};
use crate::hyptimes::{HypTimesResult, HyperbolicParams, HyperbolicScanner};
use crate::numeric::NeumaierSum;
use crate::orbits::{par_map_points, OrbitStepper, OrbitTrace};

/// T_f(φ)(x) = Σ_{f(z)=x} φ(z)/|f'(z)|, for x in (-1, 1).
pub fn transfer_apply(map: &IntermittentCircleMap, phi: impl Fn(CirclePoint) -> f64, x: CirclePoint) -> Result<f64> {
    let (z1, z2) = map.inverse_branches(x)?;
    Ok(phi(z1) * map.inverse_jacobian(z1) + phi(z2) * map.inverse_jacobian(z2))
}

/// Left endpoint of cell `i` out of `k`.
pub fn cell_left(i: usize, k: usize) -> f64 {
    -1.0 + 2.0 * i as f64 / k as f64
}

/// Index of the cell containing coordinate `x` in [-1, 1).
pub fn cell_of(x: f64, k: usize) -> usize {
    let i = ((x + 1.0) * 0.5 * k as f64).floor();
    (i.max(0.0) as usize).min(k - 1)
}

/// Sparse row-stochastic K x K matrix P with P[i][j] = m(cell_i ∩ f^{-1} cell_j) / m(cell_i).
#[derive(Debug, Clone, PartialEq)]
pub struct UlamOperator {
    k: usize,
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
}

impl UlamOperator {
    /// Builds the operator from sparse rows of (column, value) pairs.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let k = rows.len();
        if k < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 cells, got {k}")));
        }
        let mut cols = vec![Vec::new(); k];
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                if j >= k {
                    return Err(Error::InvalidArgument(format!("column {j} out of range for K = {k}")));
                }
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidArgument(format!("entry ({i}, {j}) = {v} is not a probability")));
                }
                cols[j].push((i, v));
            }
        }
        Ok(Self { k, rows, cols })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().filter(|&&(c, _)| c == j).map(|&(_, v)| v).sum()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn nonzeros(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(_, v)| v).collect::<NeumaierSum>().value())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.k]; self.k];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[i][j] += v;
            }
        }
        m
    }

    /// v ↦ vP, one column per task so the reduction order is fixed.
    pub fn left_apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.k, "vector length must equal K");
        self.cols
            .par_iter()
            .map(|col| col.iter().map(|&(i, p)| v[i] * p).collect::<NeumaierSum>().value())
            .collect()
    }

    /// max |P - Q| entrywise.
    pub fn max_abs_diff(&self, other: &UlamOperator) -> f64 {
        assert_eq!(self.k, other.k);
        let a = self.to_dense();
        let b = other.to_dense();
        a.iter()
            .zip(&b)
            .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Exact-branch Ulam matrix of the intermittent map: the preimage of an arc
/// under f is its images under g1 and g2, both monotone.
pub fn build_ulam_exact(_map: &IntermittentCircleMap, k: usize) -> Result<UlamOperator> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 cells, got {k}")));
    }
    let width = 2.0 / k as f64;
    let rows = (0..k)
        .into_par_iter()
        .map(|i| {
            let (l, r) = (cell_left(i, k), cell_left(i + 1, k));
            let mut row = Vec::new();
            // g1 covers [0, 1) and g2 covers [-1, 0); f restricted to either
            // half is increasing onto [-1, 1).
            let halves: [(f64, f64, fn(f64) -> f64, fn(f64) -> f64); 2] =
                [(-1.0, 0.0, g2, forward_neg), (0.0, 1.0, g1, forward_pos)];
            for (lo, hi, g, f) in halves {
                let a = l.max(lo);
                let b = r.min(hi);
                if a >= b {
                    continue;
                }
                let j0 = cell_of(f(a), k);
                let j1 = cell_of(f(b), k).max(j0);
                for j in j0..=j1 {
                    let pl = g(cell_left(j, k)).max(a);
                    let pr = g(cell_left(j + 1, k)).min(b);
                    if pr > pl {
                        row.push((j, (pr - pl) / width));
                    }
                }
            }
            row
        })
        .collect();
    UlamOperator::from_rows(rows)
}

fn forward_pos(x: f64) -> f64 {
    2.0 * x.sqrt() - 1.0
}

fn forward_neg(x: f64) -> f64 {
    1.0 - 2.0 * (-x).sqrt()
}

/// Monte Carlo Ulam matrix for any map: `samples_per_cell` stratified,
/// jittered samples per cell, with an independent ChaCha8 stream per row.
pub fn build_ulam_sampled(map: &dyn MapSystem, k: usize, samples_per_cell: usize, seed: u64) -> Result<UlamOperator> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 cells, got {k}")));
    }
    if samples_per_cell == 0 {
        return Err(Error::InvalidArgument("samples_per_cell must be positive".into()));
    }
    let width = 2.0 / k as f64;
    let rows = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut counts = std::collections::BTreeMap::new();
            let l = cell_left(i, k);
            for s in 0..samples_per_cell {
                let u: f64 = rng.random();
                let x = l + width * (s as f64 + u) / samples_per_cell as f64;
                let x = CirclePoint::new(x).expect("sample inside the circle");
                *counts.entry(cell_of(map.eval(x).coord(), k)).or_insert(0usize) += 1;
            }
            counts
                .into_iter()
                .map(|(j, c)| (j, c as f64 / samples_per_cell as f64))
                .collect()
        })
        .collect();
    UlamOperator::from_rows(rows)
}

/// Measure on the circle given by its masses on K equal cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDensity {
    mass: Vec<f64>,
}

impl EmpiricalDensity {
    pub fn from_mass(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if let Some(&v) = mass.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!("cell mass {v} is not a non-negative number")));
        }
        Ok(Self { mass })
    }

    pub fn uniform(k: usize) -> Self {
        Self { mass: vec![1.0 / k as f64; k] }
    }

    pub fn k(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().copied().collect::<NeumaierSum>().value()
    }

    /// Density in cell i: mass[i] / m(cell_i) = mass[i]·K.
    pub fn density(&self, i: usize) -> f64 {
        self.mass[i] * self.k() as f64
    }

    pub fn densities(&self) -> Vec<f64> {
        (0..self.k()).map(|i| self.density(i)).collect()
    }

    pub fn sup_density(&self) -> f64 {
        (0..self.k()).map(|i| self.density(i)).fold(0.0, f64::max)
    }

    /// sup_i |density_i - 1|.
    pub fn sup_deviation_from_uniform(&self) -> f64 {
        (0..self.k()).map(|i| (self.density(i) - 1.0).abs()).fold(0.0, f64::max)
    }

    /// L¹(m) distance between the two step densities.
    pub fn l1_distance(&self, other: &EmpiricalDensity) -> f64 {
        assert_eq!(self.k(), other.k(), "densities on different grids");
        self.mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .collect::<NeumaierSum>()
            .value()
    }

    pub fn l1_from_uniform(&self) -> f64 {
        self.l1_distance(&Self::uniform(self.k()))
    }

    /// Merges groups of `factor` adjacent cells.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.k().is_multiple_of(factor) {
            return Err(Error::InvalidArgument(format!(
                "cannot coarsen {} cells by a factor of {factor}",
                self.k()
            )));
        }
        Ok(Self { mass: self.mass.chunks(factor).map(|c| c.iter().sum()).collect() })
    }

    /// Rescales to total mass 1.
    pub fn normalized(&self) -> Self {
        let t = self.total_mass();
        Self { mass: self.mass.iter().map(|m| m / t).collect() }
    }
}

/// Left fixed vector of `u` by power iteration from the uniform vector, until
/// the L¹ change between iterates is at most `tol`.
pub fn invariant_density(u: &UlamOperator, tol: f64, max_iters: usize) -> Result<EmpiricalDensity> {
    let k = u.k();
    let mut v = vec![1.0 / k as f64; k];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters.max(1) {
        let mut next = u.left_apply(&v);
        let total: f64 = next.iter().copied().collect::<NeumaierSum>().value();
        for x in &mut next {
            *x /= total;
        }
        residual = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).collect::<NeumaierSum>().value();
        v = next;
        if residual <= tol {
            return EmpiricalDensity::from_mass(v);
        }
    }
    Err(Error::NotConverged { iterations: max_iters, residual })
}

fn add_to_histogram(hist: &mut [f64], x: CirclePoint, weight: f64) {
    let k = hist.len();
    hist[cell_of(x.coord(), k)] += weight;
}

/// Histogram of {f^n(x) : n ∈ times(x)} over the traces, each point weighted
/// by 1/(number of traces); its total mass is the empirical m(H_n).
pub fn pushforward_restricted(
    traces: &[OrbitTrace],
    results: &[HypTimesResult],
    n: usize,
    k: usize,
) -> Result<EmpiricalDensity> {
    if traces.len() != results.len() || traces.is_empty() {
        return Err(Error::InvalidArgument("need one detection result per trace".into()));
    }
    if k == 0 {
        return Err(Error::EmptyGrid);
    }
    let weight = 1.0 / traces.len() as f64;
    let mut hist = vec![0.0; k];
    for (t, res) in traces.iter().zip(results) {
        if t.len() < n || !t.has_points() {
            return Err(Error::InvalidArgument(format!("trace must store at least {n} points")));
        }
        if res.contains(n) {
            add_to_histogram(&mut hist, t.points()[n], weight);
        }
    }
    EmpiricalDensity::from_mass(hist)
}

/// Restricted pushforwards for several n from one streamed pass per point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestrictedPushforwards {
    pub ns: Vec<usize>,
    pub densities: Vec<EmpiricalDensity>,
    /// Points whose orbit hit S before max(ns); excluded from the sample.
    pub dropped: usize,
    pub sample_size: usize,
}

pub fn pushforward_restricted_streaming(
    map: &dyn MapSystem,
    points: &[CirclePoint],
    params: &HyperbolicParams,
    ns: &[usize],
    k: usize,
) -> Result<RestrictedPushforwards> {
    if k == 0 {
        return Err(Error::EmptyGrid);
    }
    let horizon = ns.iter().copied().max().unwrap_or(0);
    let hits = par_map_points(points, |_, x0| -> Result<Vec<Option<CirclePoint>>> {
        let mut stepper = OrbitStepper::new(map, x0, params.delta())?;
        let mut scanner = HyperbolicScanner::new(params);
        let mut out = vec![None; ns.len()];
        for n in 1..=horizon {
            let s = stepper.step()?;
            let hyperbolic = scanner.push(s.a, s.r);
            if hyperbolic {
                for (slot, &m) in out.iter_mut().zip(ns) {
                    if m == n {
                        *slot = Some(stepper.current());
                    }
                }
            }
        }
        Ok(out)
    });
    let mut dropped = 0;
    let mut kept = Vec::with_capacity(hits.len());
    for h in hits {
        match h {
            Ok(v) => kept.push(v),
            Err(Error::OrbitHitExceptionalSet { .. }) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    if kept.is_empty() {
        return Err(Error::InvalidArgument("every orbit hit the exceptional set".into()));
    }
    let weight = 1.0 / kept.len() as f64;
    let mut hists = vec![vec![0.0; k]; ns.len()];
    for v in &kept {
        for (hist, hit) in hists.iter_mut().zip(v) {
            if let Some(x) = hit {
                add_to_histogram(hist, *x, weight);
            }
        }
    }
    Ok(RestrictedPushforwards {
        ns: ns.to_vec(),
        densities: hists.into_iter().map(EmpiricalDensity::from_mass).collect::<Result<_>>()?,
        dropped,
        sample_size: kept.len(),
    })
}

/// (1/n) Σ_{j<n} of the ensemble's pushforward histograms under f^j.
pub fn cesaro_density(map: &dyn MapSystem, points: &[CirclePoint], n: usize, k: usize) -> Result<EmpiricalDensity> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if k == 0 {
        return Err(Error::EmptyGrid);
    }
    if points.is_empty() {
        return Err(Error::InvalidArgument("ensemble must contain at least one point".into()));
    }
    let counts = par_map_points(points, |_, x0| {
        let mut c = vec![0u32; k];
        let mut x = x0;
        for _ in 0..n {
            c[cell_of(x.coord(), k)] += 1;
            x = map.eval(x);
        }
        c
    });
    let mut total = vec![0u64; k];
    for c in counts {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v as u64;
        }
    }
    let denom = n as f64 * points.len() as f64;
    EmpiricalDensity::from_mass(total.into_iter().map(|c| c as f64 / denom).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DoublingBaselineMap;
    use crate::hyptimes::detect_fast;
    use crate::orbits::{generate_orbit, EnsembleSpec};

    const F: IntermittentCircleMap = IntermittentCircleMap;

    #[test]
    fn transfer_fixes_constants() {
        let x = CirclePoint::new(0.0).unwrap();
        assert_eq!(transfer_apply(&F, |_| 1.0, x).unwrap(), 1.0);
        for p in EnsembleSpec::random(10_000, 3).points() {
            if p.coord() == -1.0 {
                continue;
            }
            assert!((transfer_apply(&F, |_| 1.0, p).unwrap() - 1.0).abs() <= 1e-12);
            assert!((transfer_apply(&F, |_| -2.5, p).unwrap() + 2.5).abs() <= 1e-12);
        }
        assert!(matches!(
            transfer_apply(&F, |_| 1.0, CirclePoint::new(-1.0).unwrap()),
            Err(Error::BranchBoundary { .. })
        ));
    }

    #[test]
    fn cells() {
        assert_eq!(cell_of(-1.0, 4), 0);
        assert_eq!(cell_of(-0.5, 4), 1);
        assert_eq!(cell_of(0.999_999, 4), 3);
        assert_eq!(cell_left(2, 4), 0.0);
    }

    #[test]
    fn exact_ulam_two_cells_by_hand() {
        // g2([-1,0)) = [-1,-1/4), g2([0,1)) = [-1/4,0), g1 mirrors on [0,1)
        let u = build_ulam_exact(&F, 2).unwrap();
        let d = u.to_dense();
        assert!((d[0][0] - 0.75).abs() < 1e-15 && (d[0][1] - 0.25).abs() < 1e-15);
        assert!((d[1][0] - 0.25).abs() < 1e-15 && (d[1][1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn exact_ulam_is_stochastic_and_fixes_uniform() {
        for k in [16, 256, 4096] {
            let u = build_ulam_exact(&F, k).unwrap();
            for s in u.row_sums() {
                assert!((s - 1.0).abs() <= 1e-12, "K = {k}: row sum {s}");
            }
            let uni = vec![1.0 / k as f64; k];
            let img = u.left_apply(&uni);
            for (a, b) in img.iter().zip(&uni) {
                assert!((a - b).abs() <= 1e-10);
            }
            assert!(u.rows.iter().flatten().all(|&(_, v)| v >= 0.0));
        }
        assert!(build_ulam_exact(&F, 1).is_err());
    }

    #[test]
    fn sampled_ulam() {
        let u = build_ulam_sampled(&DoublingBaselineMap, 4, 1000, 1).unwrap();
        for i in 0..4 {
            assert_eq!(u.row(i).len(), 2);
            assert!(u.row(i).iter().all(|&(_, v)| v == 0.5));
        }
        let exact = build_ulam_exact(&F, 256).unwrap();
        let sampled = build_ulam_sampled(&F, 256, 1000, 7).unwrap();
        assert!(exact.max_abs_diff(&sampled) <= 0.05);
        assert_eq!(sampled, build_ulam_sampled(&F, 256, 1000, 7).unwrap());
        for s in sampled.row_sums() {
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn invariant_densities() {
        let d = invariant_density(&build_ulam_exact(&F, 4096).unwrap(), 1e-10, 100_000).unwrap();
        assert!(d.sup_deviation_from_uniform() <= 0.02);
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
        let d = invariant_density(&build_ulam_sampled(&DoublingBaselineMap, 256, 8, 0).unwrap(), 1e-10, 1).unwrap();
        assert!(d.sup_deviation_from_uniform() <= 1e-12);
        let rot: Vec<Vec<(usize, f64)>> = (0..8).map(|i| vec![((i + 1) % 8, 1.0)]).collect();
        let d = invariant_density(&UlamOperator::from_rows(rot).unwrap(), 1e-14, 1).unwrap();
        assert_eq!(d, EmpiricalDensity::uniform(8));
    }

    #[test]
    fn power_iteration_reports_non_convergence() {
        // a transient cell feeding a 2-cycle pushes the uniform start off balance
        let swap = UlamOperator::from_rows(vec![vec![(1, 1.0)], vec![(0, 1.0)], vec![(0, 1.0)]]).unwrap();
        assert!(matches!(invariant_density(&swap, 1e-12, 10), Err(Error::NotConverged { iterations: 10, .. })));
    }

    #[test]
    fn density_helpers() {
        let d = EmpiricalDensity::from_mass(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!((d.density(3) - 1.6).abs() < 1e-15);
        let c = d.coarsen(2).unwrap();
        assert!((c.mass()[0] - 0.3).abs() < 1e-15);
        assert!(d.coarsen(3).is_err());
        assert!((d.l1_from_uniform() - 0.4).abs() < 1e-15);
        assert!(EmpiricalDensity::from_mass(vec![-0.1]).is_err());
    }

    #[test]
    fn doubling_pushforward_is_full_and_uniform() {
        let p = HyperbolicParams::new(0.5, 0.1, 0.25, 0.5).unwrap();
        let pts = EnsembleSpec::grid(64).points();
        let traces: Vec<_> = pts.iter().map(|&x| generate_orbit(&DoublingBaselineMap, x, 4, 0.1).unwrap()).collect();
        let res: Vec<_> = traces.iter().map(|t| detect_fast(t, &p).unwrap()).collect();
        let nu = pushforward_restricted(&traces, &res, 3, 8).unwrap();
        assert_eq!(nu.total_mass(), 1.0);
        assert!(nu.sup_deviation_from_uniform() < 1e-12);
        let s = pushforward_restricted_streaming(&DoublingBaselineMap, &pts, &p, &[3], 8).unwrap();
        assert_eq!(s.densities[0], nu);
    }

    #[test]
    fn restricted_mass_is_fraction_in_h_n() {
        let p = HyperbolicParams::intermittent_default();
        let pts = EnsembleSpec::random(300, 11).points();
        let traces: Vec<_> = pts
            .iter()
            .filter_map(|&x| generate_orbit(&F, x, 200, p.delta()).ok())
            .collect();
        let res: Vec<_> = traces.iter().map(|t| detect_fast(t, &p).unwrap()).collect();
        for n in [1, 10, 100] {
            let nu = pushforward_restricted(&traces, &res, n, 32).unwrap();
            let frac = res.iter().filter(|r| r.contains(n)).count() as f64 / res.len() as f64;
            assert!((nu.total_mass() - frac).abs() < 1e-12);
        }
    }

    #[test]
    fn cesaro_of_invariant_maps() {
        let pts = EnsembleSpec::grid(1024).points();
        let d = cesaro_density(&F, &pts, 1, 16).unwrap();
        assert!(d.sup_deviation_from_uniform() < 1e-12);
        let random = EnsembleSpec::random(100_000, 5).points();
        let d = cesaro_density(&DoublingBaselineMap, &random, 10, 16).unwrap();
        assert!(d.sup_deviation_from_uniform() < 0.05);
        assert!(cesaro_density(&F, &pts, 0, 16).is_err());
    }
}
