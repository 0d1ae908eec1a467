//! Globally adaptive Gauss–Kronrod (7/15) quadrature for real and complex
//! integrands.

use std::collections::BinaryHeap;
use std::cmp::Ordering;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature budget of {limit} intervals exhausted (error estimate {error:e})")]
    BudgetExhausted { limit: usize, error: f64 },
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-13, rel_tol: 1e-10, max_intervals: 4000 }
    }
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> Result<(T, f64), QuadError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    if !fc.magnitude().is_finite() {
        return Err(QuadError::NonFinite { x: c });
    }
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let f1 = f(c - x);
        let f2 = f(c + x);
        if !f1.magnitude().is_finite() {
            return Err(QuadError::NonFinite { x: c - x });
        }
        if !f2.magnitude().is_finite() {
            return Err(QuadError::NonFinite { x: c + x });
        }
        let s = f1 + f2;
        kronrod = kronrod + s * WGK[i];
        if i % 2 == 1 {
            gauss = gauss + s * WG[i / 2];
        }
    }
    let value = kronrod * h;
    let err = ((kronrod - gauss) * h).magnitude();
    Ok((value, err))
}

/// Integrates `f` over `[points[0], points[last]]`, starting from the
/// subdivision given by `points` (which must be increasing).
pub fn integrate<T: QuadValue, F: Fn(f64) -> T>(
    f: F,
    points: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult<T>, QuadError> {
    assert!(points.len() >= 2, "need at least one interval");
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (value, error) = gk15(&f, w[0], w[1])?;
        evaluations += 15;
        heap.push(Segment { a: w[0], b: w[1], value, error });
    }
    loop {
        let total = heap.iter().fold(T::zero(), |acc, s| acc + s.value);
        let error: f64 = heap.iter().map(|s| s.error).sum();
        if error <= opts.abs_tol.max(opts.rel_tol * total.magnitude()) {
            return Ok(QuadResult { value: total, error, evaluations });
        }
        if heap.len() >= opts.max_intervals {
            return Err(QuadError::BudgetExhausted { limit: opts.max_intervals, error });
        }
        let worst = match heap.pop() {
            Some(s) => s,
            None => return Ok(QuadResult { value: total, error, evaluations }),
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in floating point
            heap.push(Segment { error: 0.0, ..worst });
            continue;
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gk15(&f, a, b)?;
            evaluations += 15;
            heap.push(Segment { a, b, value, error });
        }
    }
}

/// Integrates `f` over `[a, ∞)` by the substitution `x = a + u/(1−u)`.
pub fn integrate_to_infinity<T: QuadValue, F: Fn(f64) -> T>(
    f: F,
    a: f64,
    opts: QuadOptions,
) -> Result<QuadResult<T>, QuadError> {
    let g = |u: f64| {
        let one_minus = 1.0 - u;
        let x = a + u / one_minus;
        let jac = 1.0 / (one_minus * one_minus);
        let v = f(x);
        if jac.is_finite() {
            v * jac
        } else {
            T::zero()
        }
    };
    integrate(g, &[0.0, 0.5, 0.9, 0.99, 1.0], opts)
}

/// Uniform subdivision of `[a, b]` into `n` pieces.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x: f64| x.powi(5) - 2.0 * x, &[0.0, 2.0], QuadOptions::default()).unwrap();
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn peaked_integrand() {
        let eps = 1e-4;
        let f = |x: f64| eps / (x * x + eps * eps);
        let r = integrate(f, &linspace(-1.0, 1.0, 8), QuadOptions::default()).unwrap();
        let exact = 2.0 * (1.0 / eps).atan();
        assert!((r.value - exact).abs() < 1e-9);
    }

    #[test]
    fn complex_integrand() {
        let f = |x: f64| Complex64::new(0.0, x).exp();
        let r = integrate(f, &[0.0, std::f64::consts::PI], QuadOptions::default()).unwrap();
        assert!((r.value - Complex64::new(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn infinite_tail() {
        let r = integrate_to_infinity(|x: f64| 1.0 / (1.0 + x * x), 0.0, QuadOptions::default()).unwrap();
        assert!((r.value - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn budget_exhaustion_reported() {
        let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-15, max_intervals: 4 };
        let r = integrate(|x: f64| x.abs().sqrt(), &[-1.0, 1.0], opts);
        assert!(matches!(r, Err(QuadError::BudgetExhausted { .. })));
    }
}
