//! Modal system at fixed wavenumber: the generator of one scalar
//! polarization block, its spectral projectors, exact and RK4 evolution,
//! and the energy/dissipation ledger.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assign::min_cost_assignment;
use crate::dispersion::{DispersionError, DispersionSolver};
use crate::material::{Channel, MaterialSpec};

type C = Complex64;
const I: C = C { re: 0.0, im: 1.0 };
const ONE: C = C { re: 1.0, im: 0.0 };

/// Relative eigenvalue gap below which eigenvalues are grouped.
pub const CLUSTER_GAP: f64 = 1e-6;
const CONTOUR_NODES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModalError {
    #[error("no circle separates the eigenvalue cluster at {center} with a 10x margin")]
    ClusterSeparationFailure { center: C },
    #[error("time step {dt:e} exceeds 0.1/‖A‖ = {limit:e}")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("eigen-decomposition failed to converge")]
    EigenFailure,
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
}

impl ModalError {
    pub fn code(&self) -> &'static str {
        match self {
            ModalError::ClusterSeparationFailure { .. } => "modal.cluster_separation_failure",
            ModalError::StepTooLarge { .. } => "modal.step_too_large",
            ModalError::InvalidInput(_) => "modal.invalid_input",
            ModalError::EigenFailure => "modal.eigen_failure",
            ModalError::Dispersion(e) => e.code(),
        }
    }
}

/// Role of one coordinate of the modal state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Component {
    E,
    H,
    P(usize),
    PDot(usize),
    M(usize),
    MDot(usize),
}

/// One scalar polarization block: `U′ = −i A U`.
#[derive(Clone, Debug)]
pub struct ModalSystem {
    pub k_abs: f64,
    pub polarization_sign: i8,
    pub matrix: DMatrix<C>,
    pub weights: Vec<f64>,
    pub layout: Vec<Component>,
    /// `α` on the velocity coordinates, zero elsewhere
    pub damping: Vec<f64>,
}

/// Assembles the generator for wavenumber `k_abs` and polarization `±1`.
pub fn build_modal(spec: &MaterialSpec, k_abs: f64, polarization_sign: i8) -> Result<ModalSystem, ModalError> {
    if !(k_abs >= 0.0) || !k_abs.is_finite() {
        return Err(ModalError::InvalidInput(format!("wavenumber must be finite and nonnegative, got {k_abs}")));
    }
    if polarization_sign != 1 && polarization_sign != -1 {
        return Err(ModalError::InvalidInput("polarization sign must be +1 or -1".into()));
    }
    let s = polarization_sign as f64;
    let (eps0, mu0) = (spec.eps0(), spec.mu0());
    let ne = spec.electric().len();
    let nm = spec.magnetic().len();
    let n = 2 + 2 * (ne + nm);
    let mut g = DMatrix::<C>::zeros(n, n);
    let mut weights = vec![0.0; n];
    let mut damping = vec![0.0; n];
    let mut layout = vec![Component::E, Component::H];
    weights[0] = eps0;
    weights[1] = mu0;
    g[(0, 1)] = I * (s * k_abs / eps0);
    g[(1, 0)] = I * (s * k_abs / mu0);
    for (channel, field, bg, offset) in [(Channel::Electric, 0usize, eps0, 2usize), (Channel::Magnetic, 1, mu0, 2 + 2 * ne)] {
        for (j, o) in spec.oscillators(channel).iter().enumerate() {
            let (p, v) = (offset + 2 * j, offset + 2 * j + 1);
            let om2 = o.coupling * o.coupling;
            let w02 = o.resonance * o.resonance;
            g[(field, v)] = C::new(-om2, 0.0);
            g[(p, v)] = ONE;
            g[(v, field)] = ONE;
            g[(v, p)] = C::new(-w02, 0.0);
            g[(v, v)] = C::new(-o.damping, 0.0);
            weights[p] = bg * om2 * w02;
            weights[v] = bg * om2;
            damping[v] = o.damping;
            layout.push(if channel == Channel::Electric { Component::P(j) } else { Component::M(j) });
            layout.push(if channel == Channel::Electric { Component::PDot(j) } else { Component::MDot(j) });
        }
    }
    Ok(ModalSystem { k_abs, polarization_sign, matrix: g * I, weights, layout, damping })
}

impl ModalSystem {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `½ Σ wᵢ|uᵢ|²`
    pub fn energy(&self, u: &DVector<C>) -> f64 {
        0.5 * self.weights.iter().zip(u.iter()).map(|(w, x)| w * x.norm_sqr()).sum::<f64>()
    }

    /// Electromagnetic part `½(ε₀|E|² + μ₀|H|²)`.
    pub fn em_energy(&self, u: &DVector<C>) -> f64 {
        0.5 * (self.weights[0] * u[0].norm_sqr() + self.weights[1] * u[1].norm_sqr())
    }

    /// Dissipation rate `Σ wᵢ αᵢ |uᵢ|²` over the velocity coordinates.
    pub fn dissipation(&self, u: &DVector<C>) -> f64 {
        self.weights.iter().zip(&self.damping).zip(u.iter()).map(|((w, a), x)| w * a * x.norm_sqr()).sum()
    }

    /// Positive diagonal `D` with `A = A₀ − iD`.
    pub fn damping_matrix(&self) -> DMatrix<C> {
        DMatrix::from_diagonal(&DVector::from_iterator(self.dim(), self.damping.iter().map(|&a| C::new(a, 0.0))))
    }

    /// `‖B − B*‖ / ‖B‖` for `B = W A₀ W⁻¹` on the coordinates with positive
    /// weight, where `A₀ = A + iD` is the conservative part.
    pub fn self_adjoint_defect(&self) -> f64 {
        let idx: Vec<usize> = (0..self.dim()).filter(|&i| self.weights[i] > 0.0).collect();
        let a0 = &self.matrix + self.damping_matrix() * I;
        let m = idx.len();
        let b = DMatrix::<C>::from_fn(m, m, |r, c| {
            let (i, j) = (idx[r], idx[c]);
            a0[(i, j)] * (self.weights[i] / self.weights[j]).sqrt()
        });
        let d = (&b - b.adjoint()).norm();
        let scale = b.norm();
        if scale == 0.0 {
            0.0
        } else {
            d / scale
        }
    }

    /// Spectral norm of the matrix.
    pub fn spectral_norm(&self) -> f64 {
        self.matrix.clone().svd(false, false).singular_values.max()
    }

    /// State vector from the E and H components, auxiliary fields zero.
    pub fn field_state(&self, e: C, h: C) -> DVector<C> {
        let mut u = DVector::<C>::zeros(self.dim());
        u[0] = e;
        u[1] = h;
        u
    }
}

/// One eigenvalue (or merged cluster) with its spectral projector.
#[derive(Clone, Debug)]
pub struct SpectralComponent {
    pub eigenvalue: C,
    pub multiplicity: usize,
    pub projector: DMatrix<C>,
    /// `(A − λ)Π` restricted to the cluster; `None` for simple eigenvalues
    pub nilpotent: Option<DMatrix<C>>,
    pub right: Option<DVector<C>>,
    pub left: Option<DVector<C>>,
    /// spectral norm `‖Π‖₂`
    pub condition: f64,
}

#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<C>,
    pub components: Vec<SpectralComponent>,
    pub diagonalizable: bool,
    pub matrix: DMatrix<C>,
}

fn null_vector(m: &DMatrix<C>) -> DVector<C> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    v_t.row(imin).adjoint()
}

fn shifted(a: &DMatrix<C>, z: C) -> DMatrix<C> {
    let mut m = a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] -= z;
    }
    m
}

fn sort_complex(v: &mut [C]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Eigenvalues sorted by real then imaginary part.
pub fn eigenvalues(a: &DMatrix<C>) -> Result<Vec<C>, ModalError> {
    let ev = a.clone().schur().eigenvalues().ok_or(ModalError::EigenFailure)?;
    let mut v: Vec<C> = ev.iter().copied().collect();
    sort_complex(&mut v);
    Ok(v)
}

/// Eigenvalues, eigenvectors and projectors. Eigenvalues closer than
/// [`CLUSTER_GAP`] (relative to the matrix scale) are merged and their
/// joint projector is computed by trapezoidal resolvent quadrature on a
/// separating circle.
pub fn spectral_decomposition(sys: &ModalSystem) -> Result<SpectralDecomposition, ModalError> {
    let a = &sys.matrix;
    let n = a.nrows();
    let eig = eigenvalues(a)?;
    let scale = eig.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let gap = CLUSTER_GAP * scale;

    // single-linkage grouping
    let mut group: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if (eig[i] - eig[j]).norm() < gap {
                let (gi, gj) = (group[i], group[j]);
                for g in group.iter_mut() {
                    if *g == gj {
                        *g = gi;
                    }
                }
            }
        }
    }
    let mut ids: Vec<usize> = group.clone();
    ids.sort();
    ids.dedup();

    let mut components = Vec::with_capacity(ids.len());
    let mut diagonalizable = true;
    for id in ids {
        let members: Vec<usize> = (0..n).filter(|&i| group[i] == id).collect();
        let m = members.len();
        let center = members.iter().map(|&i| eig[i]).sum::<C>() / m as f64;
        if m == 1 {
            let lam = eig[members[0]];
            let v = null_vector(&shifted(a, lam));
            let w = null_vector(&shifted(&a.adjoint(), lam.conj()));
            let denom = (w.adjoint() * &v)[(0, 0)];
            let projector = (&v * w.adjoint()) / denom;
            let condition = projector.clone().svd(false, false).singular_values.max();
            components.push(SpectralComponent {
                eigenvalue: lam,
                multiplicity: 1,
                projector,
                nilpotent: None,
                right: Some(v),
                left: Some(w),
                condition,
            });
            continue;
        }
        diagonalizable = false;
        let spread = members.iter().map(|&i| (eig[i] - center).norm()).fold(0.0, f64::max);
        let outside = (0..n)
            .filter(|i| !members.contains(i))
            .map(|i| (eig[i] - center).norm())
            .fold(f64::INFINITY, f64::min);
        let r = if outside.is_finite() { 0.5 * outside } else { (20.0 * spread).max(1e-3 * scale) };
        if spread > r / 10.0 {
            return Err(ModalError::ClusterSeparationFailure { center });
        }
        let mut proj = DMatrix::<C>::zeros(n, n);
        for q in 0..CONTOUR_NODES {
            let e = C::from_polar(1.0, 2.0 * std::f64::consts::PI * q as f64 / CONTOUR_NODES as f64);
            let z = center + r * e;
            // (z − A)⁻¹
            let res = shifted(a, z).scale(-1.0).try_inverse().ok_or(ModalError::EigenFailure)?;
            proj += res * (r * e);
        }
        proj /= C::new(CONTOUR_NODES as f64, 0.0);
        let nil = shifted(a, center) * &proj;
        let condition = proj.clone().svd(false, false).singular_values.max();
        components.push(SpectralComponent {
            eigenvalue: center,
            multiplicity: m,
            projector: proj,
            nilpotent: Some(nil),
            right: None,
            left: None,
            condition,
        });
    }
    components.sort_by(|x, y| x.eigenvalue.re.total_cmp(&y.eigenvalue.re).then(x.eigenvalue.im.total_cmp(&y.eigenvalue.im)));
    Ok(SpectralDecomposition { eigenvalues: eig, components, diagonalizable, matrix: a.clone() })
}

impl SpectralDecomposition {
    /// `‖ΣΠ − I‖` (Frobenius).
    pub fn completeness_defect(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut sum = DMatrix::<C>::zeros(n, n);
        for c in &self.components {
            sum += &c.projector;
        }
        (sum - DMatrix::<C>::identity(n, n)).norm()
    }

    /// `max ‖ΠₙΠₘ − δₙₘΠₙ‖` (Frobenius).
    pub fn idempotency_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.components.iter().enumerate() {
            for (j, b) in self.components.iter().enumerate() {
                let prod = &a.projector * &b.projector;
                let d = if i == j { (prod - &a.projector).norm() } else { prod.norm() };
                worst = worst.max(d);
            }
        }
        worst
    }

    /// `max ‖AΠₙ − λₙΠₙ‖` over simple eigenvalues.
    pub fn eigen_residual(&self) -> f64 {
        self.components
            .iter()
            .filter(|c| c.multiplicity == 1)
            .map(|c| (&self.matrix * &c.projector - &c.projector * c.eigenvalue).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_condition(&self) -> f64 {
        self.components.iter().map(|c| c.condition).fold(0.0, f64::max)
    }

    /// `Σₙ e^{−iλₙt} Πₙ u0`, with the nilpotent series for merged clusters.
    pub fn evolve(&self, u0: &DVector<C>, t: f64) -> DVector<C> {
        let mut out = DVector::<C>::zeros(u0.len());
        for c in &self.components {
            let phase = (-I * c.eigenvalue * t).exp();
            let base = &c.projector * u0;
            match &c.nilpotent {
                None => out += base * phase,
                Some(nil) => {
                    // exp(−iNt) applied to Πu0 by its Taylor series
                    let mut term = base.clone();
                    let mut acc = base;
                    for j in 1..80 {
                        term = (nil * &term) * (-I * t / j as f64);
                        acc += &term;
                        if term.norm() <= 1e-18 * acc.norm() {
                            break;
                        }
                    }
                    out += acc * phase;
                }
            }
        }
        out
    }
}

/// Exact modal evolution `e^{−iAt}u0`.
pub fn evolve(decomp: &SpectralDecomposition, u0: &DVector<C>, t: f64) -> DVector<C> {
    decomp.evolve(u0, t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    /// centered `de/dt + δ`; zero at the end points
    pub balance_defect: f64,
}

#[derive(Clone, Debug)]
pub struct RkResult {
    pub state: DVector<C>,
    pub ledger: Vec<LedgerRow>,
    pub max_balance_defect: f64,
    pub steps: usize,
}

fn rhs(a: &DMatrix<C>, u: &DVector<C>) -> DVector<C> {
    (a * u) * (-I)
}

/// Classic RK4 on `U′ = −iAU` with a uniform step `≤ dt` ending exactly at
/// `t`, recording energy, dissipation and the centered balance defect.
pub fn rk4_reference(sys: &ModalSystem, u0: &DVector<C>, t: f64, dt: f64) -> Result<RkResult, ModalError> {
    if !(t >= 0.0) || !(dt > 0.0) {
        return Err(ModalError::InvalidInput("need t ≥ 0 and dt > 0".into()));
    }
    let limit = 0.1 / sys.spectral_norm().max(f64::MIN_POSITIVE);
    if dt > limit {
        return Err(ModalError::StepTooLarge { dt, limit });
    }
    let steps = (t / dt).ceil().max(if t > 0.0 { 1.0 } else { 0.0 }) as usize;
    let h = if steps == 0 { 0.0 } else { t / steps as f64 };
    let a = &sys.matrix;
    let mut u = u0.clone();
    let mut ledger = Vec::with_capacity(steps + 1);
    ledger.push(LedgerRow { t: 0.0, energy: sys.energy(&u), dissipation: sys.dissipation(&u), balance_defect: 0.0 });
    for i in 0..steps {
        let k1 = rhs(a, &u);
        let k2 = rhs(a, &(&u + &k1 * C::new(0.5 * h, 0.0)));
        let k3 = rhs(a, &(&u + &k2 * C::new(0.5 * h, 0.0)));
        let k4 = rhs(a, &(&u + &k3 * C::new(h, 0.0)));
        u += (k1 + k2 * C::new(2.0, 0.0) + k3 * C::new(2.0, 0.0) + k4) * C::new(h / 6.0, 0.0);
        ledger.push(LedgerRow {
            t: (i + 1) as f64 * h,
            energy: sys.energy(&u),
            dissipation: sys.dissipation(&u),
            balance_defect: 0.0,
        });
    }
    let mut worst: f64 = 0.0;
    for i in 1..ledger.len().saturating_sub(1) {
        let de = (ledger[i + 1].energy - ledger[i - 1].energy) / (2.0 * h);
        let d = de + ledger[i].dissipation;
        ledger[i].balance_defect = d;
        worst = worst.max(d.abs());
    }
    Ok(RkResult { state: u, ledger, max_balance_defect: worst, steps })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMatch {
    pub k_abs: f64,
    pub eigenvalues: Vec<C>,
    pub roots: Vec<C>,
    /// `max |eig − root|` over the optimal matching
    pub max_distance: f64,
    /// `max |eig − root| / (1 + |root|)`
    pub max_scaled_distance: f64,
}

/// Matches the roots of the dispersion relation into the eigenvalues of
/// the modal matrix. Drude terms add eigenvalues at 0 without a root.
pub fn spectrum_consistency(spec: &MaterialSpec, k_abs: f64) -> Result<SpectrumMatch, ModalError> {
    let solver = DispersionSolver::new(spec)?;
    spectrum_consistency_with(&solver, k_abs)
}

pub fn spectrum_consistency_with(solver: &DispersionSolver, k_abs: f64) -> Result<SpectrumMatch, ModalError> {
    let roots = solver.roots_at_k(k_abs)?;
    let sys = build_modal(solver.spec(), k_abs, 1)?;
    let eig = eigenvalues(&sys.matrix)?;
    let cost: Vec<Vec<f64>> = roots.iter().map(|r| eig.iter().map(|e| (r - e).norm()).collect()).collect();
    let sigma = min_cost_assignment(&cost);
    let mut max_distance: f64 = 0.0;
    let mut max_scaled: f64 = 0.0;
    for (i, &j) in sigma.iter().enumerate() {
        max_distance = max_distance.max(cost[i][j]);
        max_scaled = max_scaled.max(cost[i][j] / (1.0 + roots[i].norm()));
    }
    Ok(SpectrumMatch { k_abs, eigenvalues: eig, roots, max_distance, max_scaled_distance: max_scaled })
}
