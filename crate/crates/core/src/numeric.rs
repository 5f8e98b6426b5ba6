//! Small numerical building blocks shared by the other modules.

use std::ops::AddAssign;

/// Kahan-Babuška (Neumaier) compensated accumulator.
///
/// Long orbits near the neutral fixed point produce millions of tiny terms
/// next to occasional large ones; plain summation loses the tiny ones.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl AddAssign<f64> for NeumaierSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of a slice.
pub fn compensated_sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<NeumaierSum>().value()
}

/// Number of fractional bits of the fixed-point representation used by the
/// hyperbolic-time detectors.
pub const FIXED_FRACTION_BITS: i32 = 64;

/// Converts a real to a signed fixed-point integer with
/// [`FIXED_FRACTION_BITS`] fractional bits, rounding to nearest.
///
/// Every double with magnitude at least 2^-11 is represented exactly, and
/// sums of up to 2^40 terms of magnitude below 2^20 cannot overflow. Both
/// detectors compare window sums in this representation so that they agree
/// bit for bit, ties included.
pub fn to_fixed(value: f64) -> i128 {
    debug_assert!(value.is_finite());
    (value * 2f64.powi(FIXED_FRACTION_BITS)).round() as i128
}

/// Inverse of [`to_fixed`] (exact up to the final rounding to f64).
pub fn from_fixed(value: i128) -> f64 {
    value as f64 * 2f64.powi(-FIXED_FRACTION_BITS)
}

/// `numerator / denominator` for a fixed-point numerator, converted to f64
/// with only one rounding when the division is exact.
pub fn fixed_ratio(numerator: i128, denominator: u64) -> f64 {
    let d = denominator as i128;
    let q = numerator.div_euclid(d);
    let r = numerator.rem_euclid(d);
    (q as f64 + r as f64 / denominator as f64) * 2f64.powi(-FIXED_FRACTION_BITS)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes an `order`-point rule by Newton iteration on the Legendre
    /// polynomial.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(order, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = NeumaierSum::new();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(mid + half * x));
        }
        half * acc.value()
    }
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = compensated_sum(xs) / n;
    let my = compensated_sum(ys) / n;
    let mut sxy = NeumaierSum::new();
    let mut sxx = NeumaierSum::new();
    for (&x, &y) in xs.iter().zip(ys) {
        sxy.add((x - mx) * (y - my));
        sxx.add((x - mx) * (x - mx));
    }
    let sxx = sxx.value();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy.value() / sxx)
    }
}
