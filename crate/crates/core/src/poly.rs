//! Real-coefficient polynomials in the variable `s = -iω`, companion-matrix
//! root finding and root clustering.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative cluster tolerance for merging roots.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Radius (relative to the root scale) inside which raw eigenvalues are
/// tested as candidates of a single multiple root.
const GROUP_RADIUS: f64 = 1e-5;
/// A candidate group is accepted as a multiple root when its low Taylor
/// coefficients vanish to this relative accuracy.
const MULTIPLICITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("zero polynomial has no roots")]
    ZeroPolynomial,
    #[error("ill-conditioned root clusters near {near} (separation {separation:e})")]
    IllConditioned { near: Complex64, separation: f64 },
}

/// Neumaier compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Polynomial with real coefficients in ascending degree order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    /// `s^2 + a s + b`
    pub fn quadratic(a: f64, b: f64) -> Self {
        Poly::new(vec![b, a, 1.0])
    }

    pub fn monomial(degree: usize) -> Self {
        let mut c = vec![0.0; degree + 1];
        c[degree] = 1.0;
        Poly::new(c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn norm1(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let c = (0..n)
            .map(|i| self.coeffs.get(i).unwrap_or(&0.0) + other.coeffs.get(i).unwrap_or(&0.0))
            .collect();
        Poly::new(c)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    /// Product with compensated summation of each output coefficient.
    pub fn mul(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len() + other.coeffs.len() - 1;
        let c = (0..n)
            .map(|k| {
                let lo = k.saturating_sub(other.coeffs.len() - 1);
                let hi = k.min(self.coeffs.len() - 1);
                compensated_sum((lo..=hi).map(|i| self.coeffs[i] * other.coeffs[k - i]))
            })
            .collect();
        Poly::new(c)
    }

    pub fn product<'a, I: IntoIterator<Item = &'a Poly>>(factors: I) -> Poly {
        factors.into_iter().fold(Poly::constant(1.0), |acc, f| acc.mul(f))
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly::constant(0.0);
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect(),
        )
    }

    /// Quotient and remainder of Euclidean division.
    pub fn div_rem(&self, divisor: &Poly) -> (Poly, Poly) {
        assert!(!divisor.is_zero(), "division by zero polynomial");
        let dd = divisor.degree();
        if self.degree() < dd {
            return (Poly::constant(0.0), self.clone());
        }
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0.0; self.degree() - dd + 1];
        let lead = divisor.leading();
        for i in (0..quot.len()).rev() {
            let q = rem[i + dd] / lead;
            quot[i] = q;
            for (j, d) in divisor.coeffs.iter().enumerate() {
                rem[i + j] -= q * d;
            }
            rem[i + dd] = 0.0;
        }
        rem.truncate(dd.max(1));
        (Poly::new(quot), Poly::new(rem))
    }

    /// Divides by `factor` when it divides exactly up to rounding.
    pub fn try_divide(&self, factor: &Poly) -> Option<Poly> {
        let (q, r) = self.div_rem(factor);
        let bound = 1e-12 * self.norm1().max(f64::MIN_POSITIVE);
        if r.coeffs.iter().all(|c| c.abs() <= bound) {
            Some(q)
        } else {
            None
        }
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    /// Value and first derivative by Horner's scheme.
    pub fn eval_with_derivative(&self, s: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * s + p;
            p = p * s + c;
        }
        (p, dp)
    }

    /// Taylor coefficient of order `j` at `s` and the matching sum of
    /// absolute terms, used as a rounding-error scale.
    pub fn taylor_with_scale(&self, j: usize, s: Complex64) -> (Complex64, f64) {
        let mut val = Complex64::new(0.0, 0.0);
        let mut scale = 0.0;
        let r = s.norm();
        for (i, &c) in self.coeffs.iter().enumerate().skip(j) {
            let b = binomial(i, j);
            val += c * b * s.powu((i - j) as u32);
            scale += c.abs() * b * r.powi((i - j) as i32);
        }
        (val, scale)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Raw roots as eigenvalues of the balanced companion matrix. Exact zero
/// roots (vanishing low coefficients) are returned exactly.
pub fn companion_roots(p: &Poly) -> Result<Vec<Complex64>, PolyError> {
    if p.is_zero() {
        return Err(PolyError::ZeroPolynomial);
    }
    let c = p.coeffs();
    let zeros = c.iter().take_while(|&&x| x == 0.0).count();
    let trimmed = &c[zeros..];
    let n = trimmed.len() - 1;
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    if n == 0 {
        return Ok(roots);
    }
    let lead = trimmed[n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -trimmed[i] / lead;
    }
    balance(&mut m);
    roots.extend(m.complex_eigenvalues().iter().copied());
    Ok(roots)
}

/// Diagonal similarity scaling by powers of two (Parlett–Reinsch).
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let radix = 2.0f64;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            let g = r / radix;
            while cc < g {
                f *= radix;
                cc *= radix * radix;
            }
            let g = r * radix;
            while cc > g {
                f /= radix;
                cc /= radix * radix;
            }
            if (cc + r) / f < 0.95 * s {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

/// A root with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootCluster {
    pub value: Complex64,
    pub multiplicity: usize,
}

/// Scale used for relative root tolerances.
pub fn root_scale(roots: &[Complex64]) -> f64 {
    roots.iter().map(|r| r.norm()).fold(1.0, f64::max)
}

fn newton_polish(p: &Poly, dp: &Poly, mut s: Complex64) -> Complex64 {
    for _ in 0..3 {
        let v = p.eval(s);
        let d = dp.eval(s);
        if d.norm() == 0.0 {
            break;
        }
        let step = v / d;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        s -= step;
        if step.norm() <= 4.0 * f64::EPSILON * s.norm() {
            break;
        }
    }
    s
}

/// Roots of a real polynomial, polished and merged into clusters with
/// multiplicities. Conjugate symmetry of the root set is enforced.
pub fn clustered_roots(p: &Poly) -> Result<Vec<RootCluster>, PolyError> {
    let raw = companion_roots(p)?;
    if raw.is_empty() {
        return Ok(vec![]);
    }
    let scale = root_scale(&raw);
    let dp = p.derivative();

    // single-linkage groups within GROUP_RADIUS
    let n = raw.len();
    let mut group = (0..n).collect::<Vec<_>>();
    fn find(g: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while g[r] != r {
            r = g[r];
        }
        g[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (raw[i] - raw[j]).norm() <= GROUP_RADIUS * scale {
                let (a, b) = (find(&mut group, i), find(&mut group, j));
                if a != b {
                    group[b] = a;
                }
            }
        }
    }
    let mut members: Vec<Vec<Complex64>> = Vec::new();
    let mut ids: Vec<usize> = Vec::new();
    for i in 0..n {
        let r = find(&mut group, i);
        match ids.iter().position(|&x| x == r) {
            Some(k) => members[k].push(raw[i]),
            None => {
                ids.push(r);
                members.push(vec![raw[i]]);
            }
        }
    }

    let mut clusters = Vec::new();
    for g in members {
        let m = g.len();
        if m == 1 {
            clusters.push(RootCluster { value: newton_polish(p, &dp, g[0]), multiplicity: 1 });
            continue;
        }
        let centroid = g.iter().sum::<Complex64>() / m as f64;
        let is_multiple = (0..m).all(|j| {
            let (v, sc) = p.taylor_with_scale(j, centroid);
            v.norm() <= MULTIPLICITY_TOL * sc.max(f64::MIN_POSITIVE)
        });
        if is_multiple {
            clusters.push(RootCluster { value: centroid, multiplicity: m });
        } else {
            for r in g {
                clusters.push(RootCluster { value: newton_polish(p, &dp, r), multiplicity: 1 });
            }
        }
    }

    let tol = CLUSTER_TOL * scale;
    for i in 0..clusters.len() {
        for j in (i + 1)..clusters.len() {
            let d = (clusters[i].value - clusters[j].value).norm();
            if d < 10.0 * tol {
                return Err(PolyError::IllConditioned { near: clusters[i].value, separation: d });
            }
        }
    }
    Ok(symmetrize_conjugate(clusters, tol))
}

/// Enforces invariance of a root multiset under conjugation (in `s`):
/// near-real roots are snapped to the real axis and conjugate partners are
/// averaged.
pub fn symmetrize_conjugate(mut roots: Vec<RootCluster>, tol: f64) -> Vec<RootCluster> {
    let mut out = Vec::with_capacity(roots.len());
    let mut used = vec![false; roots.len()];
    for r in roots.iter_mut() {
        if r.value.im.abs() <= tol {
            r.value.im = 0.0;
        }
    }
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let ri = roots[i];
        if ri.value.im == 0.0 {
            out.push(ri);
            continue;
        }
        let target = ri.value.conj();
        let partner = (0..roots.len())
            .filter(|&j| !used[j] && roots[j].multiplicity == ri.multiplicity)
            .min_by(|&a, &b| {
                (roots[a].value - target)
                    .norm()
                    .total_cmp(&(roots[b].value - target).norm())
            });
        match partner {
            Some(j) => {
                used[j] = true;
                let avg = (ri.value + roots[j].value.conj()) * 0.5;
                out.push(RootCluster { value: avg, multiplicity: ri.multiplicity });
                out.push(RootCluster { value: avg.conj(), multiplicity: ri.multiplicity });
            }
            None => out.push(ri),
        }
    }
    out.sort_by(|a, b| a.value.re.total_cmp(&b.value.re).then(a.value.im.total_cmp(&b.value.im)));
    out
}
