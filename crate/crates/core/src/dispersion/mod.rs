//! Plane-wave dispersion relation `𝒟(ω) = ω²ε(ω)μ(ω) = |k|²`: roots at a
//! given wavenumber, branch tracing, band structure and asymptotics.

mod asymptotics;
mod bands;
mod trace;

pub use asymptotics::{
    asymptotic_coefficients, verify_asymptotics, AsymptoticCoefficients, AsymptoticEntry, AsymptoticKind,
    AsymptoticReport, Regime,
};
pub use bands::{band_structure, characterization_defects, group_velocity, Band, BandStructure, Orientation};
pub use trace::{default_k_grid, trace_branches, trace_branches_with, Anchor, Branch, BranchSet, TraceOptions};

use num_complex::Complex64;
use thiserror::Error;

use crate::assign::min_cost_assignment;
use crate::material::{
    dispersion_symbol, validate_assumptions, Channel, MaterialError, MaterialSpec, Oscillator, RationalSymbol,
    StructureReport,
};
use crate::poly::{companion_roots, Poly, RootCluster};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispersionError {
    #[error("assumption violated: {flag}")]
    AssumptionViolated { flag: &'static str },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("group velocity undefined: 𝒟'(ω) vanishes at ω = {omega}")]
    DerivativeVanishes { omega: Complex64 },
    #[error("possible branch swap near |k| = {k:e} after refinement")]
    BranchSwapSuspected { k: f64 },
    #[error("regression unstable on branch {branch} ({regime}): R² = {r_squared:.6}")]
    RegressionUnstable { branch: usize, regime: String, r_squared: f64 },
    #[error("root polishing failed at |k| = {k:e}: expected {expected} roots, got {found}")]
    RootCount { k: f64, expected: usize, found: usize },
    #[error(transparent)]
    Material(#[from] MaterialError),
}

impl DispersionError {
    pub fn code(&self) -> &'static str {
        match self {
            DispersionError::AssumptionViolated { .. } => "dispersion.assumption_violated",
            DispersionError::InvalidInput(_) => "dispersion.invalid_input",
            DispersionError::DerivativeVanishes { .. } => "dispersion.derivative_vanishes",
            DispersionError::BranchSwapSuspected { .. } => "dispersion.branch_swap_suspected",
            DispersionError::RegressionUnstable { .. } => "dispersion.regression_unstable",
            DispersionError::RootCount { .. } => "dispersion.root_count",
            DispersionError::Material(e) => e.code(),
        }
    }
}

/// Precomputed data for repeated root solves on one material.
#[derive(Clone, Debug)]
pub struct DispersionSolver {
    spec: MaterialSpec,
    symbol: RationalSymbol,
    structure: StructureReport,
    zeros: Vec<RootCluster>,
    poles: Vec<RootCluster>,
    warnings: Vec<String>,
}

fn channel_terms(oscs: &[Oscillator], background: f64, w: Complex64) -> Option<(Complex64, Complex64)> {
    let mut sum = Complex64::new(1.0, 0.0);
    let mut dsum = Complex64::new(0.0, 0.0);
    for o in oscs {
        // factored form keeps ω₀ − ω exact near a resonance
        let den = (o.resonance - w) * (o.resonance + w) - I * o.damping * w;
        if den == Complex64::new(0.0, 0.0) {
            return None;
        }
        let t = o.coupling * o.coupling / den;
        sum += t;
        dsum += t * (I * o.damping + 2.0 * w) / den;
    }
    Some((background * sum, background * dsum))
}

fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

impl DispersionSolver {
    /// Checks the structural assumptions. A pole at ω = 0 (Drude terms) is
    /// accepted with a warning; the other two assumptions are required.
    pub fn new(spec: &MaterialSpec) -> Result<Self, DispersionError> {
        let structure = validate_assumptions(spec)?;
        if !structure.assumption1_ok {
            return Err(DispersionError::AssumptionViolated { flag: "assumption1_ok" });
        }
        if !structure.assumption3_ok {
            return Err(DispersionError::AssumptionViolated { flag: "assumption3_ok" });
        }
        let mut warnings = Vec::new();
        if !structure.assumption2_ok {
            warnings.push("material law has a pole at ω = 0 (Drude term); continuing".to_string());
        }
        let symbol = dispersion_symbol(spec);
        let pz = symbol.poles_and_zeros()?;
        let tol = 1e-12 * spec.parameter_scale();
        let zeros = crate::material::symmetrize_omega(pz.zeros, tol);
        let poles = crate::material::symmetrize_omega(pz.poles, tol);
        Ok(DispersionSolver { spec: spec.clone(), symbol, structure, zeros, poles, warnings })
    }

    pub fn spec(&self) -> &MaterialSpec {
        &self.spec
    }

    pub fn symbol(&self) -> &RationalSymbol {
        &self.symbol
    }

    pub fn structure(&self) -> &StructureReport {
        &self.structure
    }

    /// Zeros of 𝒟 with multiplicities (the `|k| = 0` roots).
    pub fn zeros(&self) -> &[RootCluster] {
        &self.zeros
    }

    /// Poles of 𝒟 with multiplicities (finite `|k| → ∞` limits).
    pub fn poles(&self) -> &[RootCluster] {
        &self.poles
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Number of roots at every wavenumber.
    pub fn degree(&self) -> usize {
        self.symbol.numerator.degree()
    }

    /// `P_k(s) = numerator(s) − k²·denominator(s)` in `s = −iω`.
    pub fn polynomial(&self, k: f64) -> Poly {
        self.symbol.numerator.sub(&self.symbol.denominator.scale(k * k))
    }

    /// Backward error `|P_k(s)| / Σ|c_j||s|^j` of a candidate root.
    pub fn residual(&self, omega: Complex64, k: f64) -> f64 {
        let p = self.polynomial(k);
        let s = -I * omega;
        let (v, scale) = p.taylor_with_scale(0, s);
        if scale == 0.0 {
            0.0
        } else {
            v.norm() / scale
        }
    }

    /// `𝒟(ω)` evaluated directly from the material law.
    pub fn symbol_value(&self, omega: Complex64) -> Result<Complex64, DispersionError> {
        let e = self.spec.epsilon(omega)?;
        let m = self.spec.mu(omega)?;
        Ok(omega * omega * e * m)
    }

    /// `(ω²εμ, d/dω ln(ω²εμ))`.
    fn log_terms(&self, w: Complex64) -> Option<(Complex64, Complex64)> {
        if w == Complex64::new(0.0, 0.0) {
            return None;
        }
        let (e, de) =
            channel_terms(self.spec.oscillators(Channel::Electric), self.spec.background(Channel::Electric), w)?;
        let (m, dm) =
            channel_terms(self.spec.oscillators(Channel::Magnetic), self.spec.background(Channel::Magnetic), w)?;
        if e == Complex64::new(0.0, 0.0) || m == Complex64::new(0.0, 0.0) {
            return None;
        }
        Some((w * w * e * m, 2.0 / w + de / e + dm / m))
    }

    /// Newton iteration on `ln(𝒟(ω)/k²)`, optionally deflated by known roots.
    fn polish(&self, start: Complex64, k2: f64, deflate: &[Complex64]) -> Complex64 {
        let mut w = start;
        let mut best = (f64::INFINITY, start);
        for _ in 0..60 {
            let Some((d, dlog)) = self.log_terms(w) else { break };
            let f = (d / k2).ln();
            if !f.re.is_finite() || !f.im.is_finite() {
                break;
            }
            if f.norm() < best.0 {
                best = (f.norm(), w);
            }
            let defl: Complex64 = deflate.iter().map(|r| 1.0 / (w - r)).sum();
            let g = dlog - f * defl;
            if g == Complex64::new(0.0, 0.0) {
                break;
            }
            let mut step = f / g;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            if deflate.is_empty() {
                // backtrack when the full step does not reduce |f|
                let mut tries = 0;
                while tries < 30 {
                    match self.log_terms(w - step) {
                        Some((dn, _)) if (dn / k2).ln().norm() <= f.norm() || f.norm() < 1e-13 => break,
                        _ => {
                            step *= 0.5;
                            tries += 1;
                        }
                    }
                }
            }
            w -= step;
            if step.norm() <= 2.0 * f64::EPSILON * w.norm() {
                break;
            }
        }
        match self.log_terms(w) {
            Some((d, _)) if (d / k2).ln().norm() <= best.0 => w,
            _ => best.1,
        }
    }

    fn merge_scale(&self) -> f64 {
        self.spec.omega_max().max(self.spec.parameter_scale())
    }

    /// All roots of `𝒟(ω) = k²`, counted with multiplicity and sorted by
    /// real then imaginary part.
    pub fn roots_at_k(&self, k: f64) -> Result<Vec<Complex64>, DispersionError> {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(DispersionError::InvalidInput(format!("wavenumber must be finite and nonnegative, got {k}")));
        }
        let n = self.degree();
        if k == 0.0 {
            let mut out: Vec<Complex64> =
                self.zeros.iter().flat_map(|z| std::iter::repeat(z.value).take(z.multiplicity)).collect();
            sort_complex(&mut out);
            return Ok(out);
        }
        let k2 = k * k;
        let raw: Vec<Complex64> = companion_roots(&self.polynomial(k))
            .map_err(MaterialError::from)?
            .into_iter()
            .map(|s| I * s)
            .collect();
        let mut roots: Vec<Complex64> = raw.iter().map(|&w| self.polish(w, k2, &[])).collect();
        if self.has_collapsed(&roots) {
            let mut done: Vec<Complex64> = Vec::with_capacity(n);
            for &w in &raw {
                let r = self.polish(w, k2, &done);
                done.push(self.polish(r, k2, &[]));
            }
            roots = done;
        }
        if !self.spec.is_dissipative() {
            // real for k > 0 in a non-dissipative medium
            for r in roots.iter_mut() {
                if r.im.abs() < 1e-6 * (1.0 + r.norm()) {
                    *r = self.polish(Complex64::new(r.re, 0.0), k2, &[]);
                    r.im = 0.0;
                }
            }
        }
        let mut roots = self.symmetrize(roots);
        if roots.len() != n {
            return Err(DispersionError::RootCount { k, expected: n, found: roots.len() });
        }
        sort_complex(&mut roots);
        Ok(roots)
    }

    fn has_collapsed(&self, roots: &[Complex64]) -> bool {
        for i in 0..roots.len() {
            for j in (i + 1)..roots.len() {
                if (roots[i] - roots[j]).norm() <= 1e-9 * (1.0 + roots[i].norm()) {
                    return true;
                }
            }
        }
        false
    }

    /// Pairs every root with its partner under `ω → −ω̄` and averages.
    fn symmetrize(&self, roots: Vec<Complex64>) -> Vec<Complex64> {
        let n = roots.len();
        let cost: Vec<Vec<f64>> =
            roots.iter().map(|a| roots.iter().map(|b| (a + b.conj()).norm()).collect()).collect();
        let sigma = min_cost_assignment(&cost);
        let tol = 1e-7 * self.merge_scale();
        let involution = (0..n).all(|i| sigma[sigma[i]] == i);
        if !involution || (0..n).any(|i| cost[i][sigma[i]] > tol * (1.0 + roots[i].norm())) {
            return roots;
        }
        (0..n)
            .map(|i| {
                let j = sigma[i];
                if i == j {
                    Complex64::new(0.0, roots[i].im)
                } else {
                    (roots[i] - roots[j].conj()) * 0.5
                }
            })
            .collect()
    }

    /// `𝒟'(ω)` from the reduced rational symbol.
    pub fn derivative(&self, omega: Complex64) -> Result<Complex64, DispersionError> {
        Ok(self.symbol.eval_derivative(omega)?)
    }
}

/// Roots of `𝒟(ω) = k²` for a single wavenumber.
pub fn roots_at_k(spec: &MaterialSpec, k: f64) -> Result<Vec<Complex64>, DispersionError> {
    DispersionSolver::new(spec)?.roots_at_k(k)
}
