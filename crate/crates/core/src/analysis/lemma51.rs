//! The sequence x_{n+1} = (1 + x_n)^2 / 4 and the divergence of
//! Σ n (x_{n+1} - x_n).
//!
//! The sequence is the g1-orbit of x_1: the intervals (x_n, x_{n+1}) are the
//! successive preimages of (x_1, x_2) that accumulate on the neutral point.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::g1;
use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;

/// Tolerance for the increment identity x_{n+1} - x_n = (1 - x_n)^2/4.
pub const INCREMENT_TOLERANCE: f64 = 1e-14;
/// Slack on the lower bound x_{n+1} - x_n >= 1/(16 n^2).
pub const LOWER_BOUND_SLACK: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceSequence {
    pub x1: f64,
    /// x_1, ..., x_N (index n - 1 holds x_n).
    pub x: Vec<f64>,
}

fn check_x1(x1: f64) -> Result<()> {
    if !(x1 > 0.0 && x1 < 0.5) {
        return Err(Error::InvalidArgument(format!("x1 = {x1} must lie in (0, 1/2)")));
    }
    Ok(())
}

pub fn recurrence_sequence(x1: f64, n: usize) -> Result<RecurrenceSequence> {
    check_x1(x1)?;
    let mut x = Vec::with_capacity(n);
    let mut v = x1;
    for _ in 0..n {
        x.push(v);
        v = g1(v);
    }
    Ok(RecurrenceSequence { x1, x })
}

/// One failing check: how often it failed and the first offending n.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CheckTally {
    pub failures: u64,
    pub first_failure: Option<usize>,
}

impl CheckTally {
    fn record(&mut self, ok: bool, n: usize) {
        if !ok {
            self.failures += 1;
            self.first_failure.get_or_insert(n);
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthRow {
    pub n: usize,
    pub s_n: f64,
    pub harmonic: f64,
    pub ratio_to_log: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma51Report {
    pub x1: f64,
    pub n: usize,
    /// 0 <= x_n <= 1 - 1/(2n).
    pub bound: CheckTally,
    /// |x_{n+1} - x_n - (1 - x_n)^2/4| <= 1e-14.
    pub increment: CheckTally,
    /// x_{n+1} - x_n >= 1/(16 n^2) - 1e-16.
    pub lower_bound: CheckTally,
    /// S_N >= S_{N-1}.
    pub monotone: CheckTally,
    /// S_N >= (H_N - 1)/16.
    pub harmonic: CheckTally,
    pub max_increment_error: f64,
    /// (N, S_N, H_N, S_N / ln N) at N = 10, 100, ..., and the final N.
    pub growth: Vec<GrowthRow>,
    pub final_ratio: f64,
}

impl Lemma51Report {
    pub fn passed(&self) -> bool {
        self.bound.passed()
            && self.increment.passed()
            && self.lower_bound.passed()
            && self.monotone.passed()
            && self.harmonic.passed()
            && self.final_ratio >= 1.0 / 16.0
    }
}

/// Runs every per-n check for n <= N in one pass without storing the
/// sequence.
///
/// S_N accumulates n (1 - x_n)^2/4: once x_n >= 1/2 the difference 1 - x_n
/// is exact, while x_{n+1} - x_n loses relative accuracy as the increments
/// approach the spacing of doubles near 1.
pub fn lemma51_verify(x1: f64, n_max: usize) -> Result<Lemma51Report> {
    check_x1(x1)?;
    if n_max < 10 {
        return Err(Error::InvalidArgument(format!("N = {n_max} must be at least 10")));
    }
    let mut bound = CheckTally::default();
    let mut increment = CheckTally::default();
    let mut lower_bound = CheckTally::default();
    let mut monotone = CheckTally::default();
    let mut harmonic_check = CheckTally::default();
    let mut max_err: f64 = 0.0;
    let mut s = NeumaierSum::new();
    let mut h = NeumaierSum::new();
    let mut prev_s = 0.0;
    let mut growth = Vec::new();
    let mut next_row = 10;
    let mut x = x1;
    for n in 1..=n_max {
        let nf = n as f64;
        let next = g1(x);
        let diff = next - x;
        let exact = 0.25 * (1.0 - x) * (1.0 - x);
        bound.record(x >= 0.0 && x <= 1.0 - 0.5 / nf, n);
        let err = (diff - exact).abs();
        max_err = max_err.max(err);
        increment.record(err <= INCREMENT_TOLERANCE, n);
        lower_bound.record(diff >= 1.0 / (16.0 * nf * nf) - LOWER_BOUND_SLACK, n);
        s.add(nf * exact);
        h.add(1.0 / nf);
        let s_n = s.value();
        monotone.record(s_n >= prev_s, n);
        harmonic_check.record(s_n >= (h.value() - 1.0) / 16.0, n);
        prev_s = s_n;
        if n == next_row || n == n_max {
            growth.push(GrowthRow { n, s_n, harmonic: h.value(), ratio_to_log: s_n / nf.ln() });
            if n == next_row {
                next_row = next_row.saturating_mul(10);
            }
        }
        x = next;
    }
    Ok(Lemma51Report {
        x1,
        n: n_max,
        bound,
        increment,
        lower_bound,
        monotone,
        harmonic: harmonic_check,
        max_increment_error: max_err,
        final_ratio: prev_s / (n_max as f64).ln(),
        growth,
    })
}

/// The 100-point grid x1 = (i + 1) / 202, i < 100, inside (0, 1/2).
pub fn sweep_grid() -> Vec<f64> {
    (0..100).map(|i| (i as f64 + 1.0) / 202.0).collect()
}

/// [`lemma51_verify`] on many starting values.
pub fn lemma51_sweep(x1s: &[f64], n_max: usize) -> Result<Vec<Lemma51Report>> {
    x1s.par_iter().map(|&x1| lemma51_verify(x1, n_max)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_by_hand() {
        let s = recurrence_sequence(0.25, 3).unwrap();
        assert_eq!(s.x[1], 25.0 / 64.0);
        assert!(recurrence_sequence(0.5, 3).is_err());
        assert!(recurrence_sequence(0.0, 3).is_err());
    }

    #[test]
    fn sequence_increases_towards_one() {
        let s = recurrence_sequence(0.1, 100_000).unwrap();
        assert!(s.x.windows(2).all(|w| w[0] < w[1]));
        assert!(s.x.iter().all(|&v| v < 1.0));
        assert!(1.0 - s.x.last().unwrap() < 1e-4);
    }

    #[test]
    fn canonical_start_passes_small() {
        let r = lemma51_verify(0.25, 10_000).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.growth.iter().map(|g| g.n).collect::<Vec<_>>(), vec![10, 100, 1000, 10_000]);
        for g in &r.growth {
            assert!(g.s_n >= g.harmonic / 16.0);
        }
    }

    #[test]
    fn failures_name_the_offending_n() {
        let mut t = CheckTally::default();
        t.record(true, 1);
        t.record(false, 7);
        t.record(false, 9);
        assert_eq!(t, CheckTally { failures: 2, first_failure: Some(7) });
        assert!(lemma51_verify(0.25, 9).is_err());
    }

    #[test]
    fn grid_is_inside_open_interval() {
        let g = sweep_grid();
        assert_eq!(g.len(), 100);
        assert!(g.iter().all(|&x| x > 0.0 && x < 0.5));
    }
}
