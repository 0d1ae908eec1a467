//! Plancherel-quadrature energy of plane-wave superpositions, its time
//! decay and the predicted decay exponent.
//!
//! The initial data put `E = H = g(|k|)` on the `+1` polarization block
//! (the `−1` block carries no data) with all auxiliary fields zero. Every
//! node of a log-spaced `|k|` grid is decomposed once into modes
//! `Σₙ cₙ e^{−iωₙt} vₙ`, with `ωₙ` the dispersion roots and `vₙ` the
//! closed-form eigenvectors. For each time the integrand is integrated
//! panel by panel with amplitudes and exponents linear in `k` (a Filon
//! rule, exact for linear phases), bisecting panels until the split
//! agrees with the whole to the requested tolerance.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assign::min_cost_assignment;
use crate::dispersion::{DispersionError, DispersionSolver};
use crate::fit::{linear_fit, logspace, LinearFit};
use crate::material::{classify_dissipativity, Channel, MaterialError, MaterialSpec, Oscillator};
use crate::modal::{build_modal, Component, ModalError};

type C = Complex64;
const I: C = C { re: 0.0, im: 1.0 };
const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Relative quadrature tolerance.
pub const QUAD_TOL: f64 = 1e-4;
/// R² below which a decay fit is rejected.
pub const MIN_R_SQUARED: f64 = 0.99;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecayError {
    #[error("quadrature did not reach relative tolerance {tol:e} at t = {t} (estimate {estimate:e})")]
    QuadratureFailure { t: f64, estimate: f64, tol: f64 },
    #[error("log-log fit unstable: R² = {r_squared}")]
    RegressionUnstable { r_squared: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("mode basis is singular at |k| = {k}")]
    SingularModes { k: f64 },
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error(transparent)]
    Modal(#[from] ModalError),
    #[error(transparent)]
    Material(#[from] MaterialError),
}

impl DecayError {
    pub fn code(&self) -> &'static str {
        match self {
            DecayError::QuadratureFailure { .. } => "decay.quadrature_failure",
            DecayError::RegressionUnstable { .. } => "decay.regression_unstable",
            DecayError::InvalidInput(_) => "decay.invalid_input",
            DecayError::SingularModes { .. } => "decay.singular_modes",
            DecayError::Dispersion(e) => e.code(),
            DecayError::Modal(e) => e.code(),
            DecayError::Material(e) => e.code(),
        }
    }
}

/// Radial profile `g(k) = A·kᵖ(1+k)^{−(p+s+3/2+δ)}`, optionally cut to a
/// window of wavenumbers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialDataProfile {
    pub p: f64,
    pub s: f64,
    pub tail_margin: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub support: Option<(f64, f64)>,
}

impl InitialDataProfile {
    pub fn new(p: f64, s: f64) -> Self {
        InitialDataProfile { p, s, tail_margin: 0.05, amplitude: 1.0, support: None }
    }

    pub fn with_support(mut self, lo: f64, hi: f64) -> Self {
        self.support = Some((lo, hi));
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn validate(&self) -> Result<(), DecayError> {
        let ok = self.p >= 0.0
            && self.s >= 0.0
            && self.tail_margin > 0.0
            && self.amplitude.is_finite()
            && self.p.is_finite()
            && self.s.is_finite()
            && self.tail_margin.is_finite();
        if !ok {
            return Err(DecayError::InvalidInput("profile needs p, s ≥ 0, δ > 0 and finite amplitude".into()));
        }
        if let Some((lo, hi)) = self.support {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(DecayError::InvalidInput("support window must satisfy 0 < lo < hi".into()));
            }
        }
        Ok(())
    }

    pub fn tail_exponent(&self) -> f64 {
        self.p + self.s + 1.5 + self.tail_margin
    }

    pub fn g(&self, k: f64) -> f64 {
        if let Some((lo, hi)) = self.support {
            if k < lo || k > hi {
                return 0.0;
            }
        }
        self.amplitude * k.powf(self.p) * (1.0 + k).powf(-self.tail_exponent())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionCuts {
    pub low: f64,
    pub high: f64,
}

/// Region cuts `0.1·ω_min/c` and `10·ω_max/c` in wavenumber.
pub fn region_cuts(spec: &MaterialSpec) -> RegionCuts {
    let c = spec.light_speed();
    RegionCuts { low: 0.1 * spec.omega_min() / c, high: 10.0 * spec.omega_max() / c }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// nodes per decade of the base grid
    pub points_per_decade: usize,
    /// bisection depth below a base panel
    pub max_depth: usize,
    /// cap on the refinement nodes visited per region in one time sample
    pub max_nodes: usize,
    pub rel_tol: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { points_per_decade: 24, max_depth: 30, max_nodes: 500_000, rel_tol: QUAD_TOL }
    }
}

/// Mode data at one wavenumber: eigenvalues (branch-consistent order) and
/// the Gram matrices of the modal components of the initial data.
#[derive(Clone, Debug)]
struct Node {
    k: f64,
    lambda: Vec<C>,
    /// `4πk²·½Σ_{E,H} wᵢ aₙᵢ conj(aₘᵢ)` (row-major)
    em: Vec<C>,
    total: Vec<C>,
}

/// Reduced coordinates: the modal layout without the decoupled Drude
/// positions, which have zero weight and never feed back.
fn reduced_coordinates(spec: &MaterialSpec, layout: &[Component]) -> Vec<usize> {
    layout
        .iter()
        .enumerate()
        .filter(|(_, c)| match c {
            Component::P(j) => spec.electric()[*j].resonance != 0.0,
            Component::M(j) => spec.magnetic()[*j].resonance != 0.0,
            _ => true,
        })
        .map(|(i, _)| i)
        .collect()
}

fn factored(o: &Oscillator, w: C) -> C {
    (o.resonance - w) * (o.resonance + w) - I * o.damping * w
}

/// Ratios `q*/qⱼ` of the smallest oscillator denominator to each one, and
/// `q*` itself (1 without oscillators).
fn ratios(list: &[Oscillator], w: C) -> (C, Vec<C>) {
    let q: Vec<C> = list.iter().map(|o| factored(o, w)).collect();
    let Some(imin) = (0..q.len()).min_by(|&a, &b| q[a].norm().total_cmp(&q[b].norm())) else {
        return (C::new(1.0, 0.0), vec![]);
    };
    let s = q[imin];
    let r = q.iter().enumerate().map(|(j, &qj)| if j == imin { C::new(1.0, 0.0) } else { s / qj }).collect();
    (s, r)
}

/// Right eigenvector of the `+1` block for the root `ω`, in the full
/// modal layout. Both field amplitudes are scaled by the smallest
/// denominators so the vector stays finite at the poles.
fn mode_vector(spec: &MaterialSpec, layout: &[Component], k: f64, omega: C) -> DVector<C> {
    let (se, re) = ratios(spec.electric(), omega);
    let (sm, rm) = ratios(spec.magnetic(), omega);
    // ε·q*_e and μ·q*_m
    let eps_s = spec.eps0() * (se + spec.electric().iter().zip(&re).map(|(o, r)| o.coupling * o.coupling * r).sum::<C>());
    let mu_s = spec.mu0() * (sm + spec.magnetic().iter().zip(&rm).map(|(o, r)| o.coupling * o.coupling * r).sum::<C>());
    let kc = C::new(k, 0.0);
    let build = |eh: C, hh: C| {
        let mut v = DVector::<C>::zeros(layout.len());
        for (i, c) in layout.iter().enumerate() {
            v[i] = match *c {
                Component::E => se * eh,
                Component::H => sm * hh,
                Component::P(j) => eh * re[j],
                Component::PDot(j) => -I * omega * eh * re[j],
                Component::M(j) => hh * rm[j],
                Component::MDot(j) => -I * omega * hh * rm[j],
            };
        }
        v
    };
    let a = build(kc * sm, -omega * eps_s);
    let b = build(-omega * mu_s, kc * se);
    let v = if a.norm() >= b.norm() { a } else { b };
    let n = v.norm();
    v / C::new(n, 0.0)
}

struct ModeBuilder<'a> {
    solver: &'a DispersionSolver,
    layout: Vec<Component>,
    weights: Vec<f64>,
    reduced: Vec<usize>,
}

impl<'a> ModeBuilder<'a> {
    fn new(solver: &'a DispersionSolver) -> Result<Self, DecayError> {
        let sys = build_modal(solver.spec(), 1.0, 1)?;
        let reduced = reduced_coordinates(solver.spec(), &sys.layout);
        if reduced.len() != solver.degree() {
            return Err(DecayError::InvalidInput(format!(
                "mode count {} does not match the reduced state dimension {}",
                solver.degree(),
                reduced.len()
            )));
        }
        Ok(ModeBuilder { solver, layout: sys.layout, weights: sys.weights, reduced })
    }

    /// Modal components `aₙ = cₙvₙ` of the data `E = H = 1`.
    fn components(&self, k: f64, roots: &[C]) -> Result<Vec<DVector<C>>, DecayError> {
        let spec = self.solver.spec();
        let n = self.reduced.len();
        let vs: Vec<DVector<C>> = roots.iter().map(|&w| mode_vector(spec, &self.layout, k, w)).collect();
        let v = DMatrix::<C>::from_fn(n, n, |r, c| vs[c][self.reduced[r]]);
        let mut rhs = DVector::<C>::zeros(n);
        for (r, &i) in self.reduced.iter().enumerate() {
            if matches!(self.layout[i], Component::E | Component::H) {
                rhs[r] = C::new(1.0, 0.0);
            }
        }
        let coef = v.lu().solve(&rhs).ok_or(DecayError::SingularModes { k })?;
        if coef.iter().any(|c| !c.is_finite()) {
            return Err(DecayError::SingularModes { k });
        }
        Ok(vs.into_iter().zip(coef.iter()).map(|(v, &c)| v * c).collect())
    }

    fn node(&self, profile: &InitialDataProfile, k: f64, roots: Vec<C>) -> Result<Node, DecayError> {
        let a = self.components(k, &roots)?;
        let n = roots.len();
        let g = profile.g(k);
        let scale = FOUR_PI * k * k * g * g * 0.5;
        let mut em = vec![C::new(0.0, 0.0); n * n];
        let mut total = vec![C::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut se = C::new(0.0, 0.0);
                let mut st = C::new(0.0, 0.0);
                for (idx, w) in self.weights.iter().enumerate() {
                    let term = a[i][idx] * a[j][idx].conj() * *w;
                    st += term;
                    if matches!(self.layout[idx], Component::E | Component::H) {
                        se += term;
                    }
                }
                em[i * n + j] = se * scale;
                total[i * n + j] = st * scale;
            }
        }
        Ok(Node { k, lambda: roots, em, total })
    }

    /// Node at `k` with its roots ordered to follow `prev`.
    fn node_after(&self, profile: &InitialDataProfile, k: f64, prev: &[C]) -> Result<Node, DecayError> {
        let roots = self.solver.roots_at_k(k)?;
        self.node(profile, k, follow(prev, roots))
    }
}

fn follow(prev: &[C], roots: Vec<C>) -> Vec<C> {
    let cost: Vec<Vec<f64>> = prev.iter().map(|p| roots.iter().map(|r| (p - r).norm()).collect()).collect();
    min_cost_assignment(&cost).iter().map(|&j| roots[j]).collect()
}

/// Base wavenumber grid: log-spaced segments split at the region cuts
/// (and the profile support), wide enough for the latest time.
fn k_grid(spec: &MaterialSpec, profile: &InitialDataProfile, t_max: f64, ppd: usize) -> Vec<f64> {
    let cuts = region_cuts(spec);
    let growth = (spec.omega_max() * t_max).max(1.0).sqrt();
    let (mut lo, mut hi) = (cuts.low * 1e-2 / growth, cuts.high * 1e3 * growth);
    let mut stops = vec![cuts.low, cuts.high];
    if let Some((a, b)) = profile.support {
        lo = a;
        hi = b;
        stops.retain(|&x| x > a && x < b);
    }
    stops.push(lo);
    stops.push(hi);
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| (*a / *b - 1.0).abs() < 1e-12);
    let mut grid = vec![stops[0]];
    for w in stops.windows(2) {
        let decades = (w[1] / w[0]).log10();
        let n = ((decades * ppd as f64).ceil() as usize).max(2) + 1;
        grid.extend(logspace(w[0], w[1], n).into_iter().skip(1));
    }
    grid
}

/// `∫₀¹ (a + (b−a)u) e^{p + zu} du` with `z = q − p`.
fn filon(a: C, b: C, p: C, q: C) -> C {
    let z = q - p;
    if z.norm() < 1e-3 {
        let e0 = C::new(1.0, 0.0) + z / 2.0 + z * z / 6.0 + z * z * z / 24.0;
        let e1 = C::new(0.5, 0.0) + z / 3.0 + z * z / 8.0 + z * z * z / 30.0;
        return p.exp() * (a * e0 + (b - a) * e1);
    }
    let (ep, eq) = (p.exp(), q.exp());
    a * (eq - ep) / z + (b - a) * (eq * (z - 1.0) + ep) / (z * z)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct PanelValue {
    em: f64,
    total: f64,
}

impl std::ops::Add for PanelValue {
    type Output = PanelValue;
    fn add(self, o: PanelValue) -> PanelValue {
        PanelValue { em: self.em + o.em, total: self.total + o.total }
    }
}

/// Panel integral over `[k_a, k_b]` with amplitudes and exponents linear in
/// `k`. With `diagonal_only`, cross terms between modes are skipped.
fn panel(a: &Node, b: &Node, t: f64, diagonal_only: bool) -> PanelValue {
    let n = a.lambda.len();
    let mut se = C::new(0.0, 0.0);
    let mut st = C::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if diagonal_only && i != j {
                continue;
            }
            let idx = i * n + j;
            let pa = -I * (a.lambda[i] - a.lambda[j].conj()) * t;
            let pb = -I * (b.lambda[i] - b.lambda[j].conj()) * t;
            se += filon(a.em[idx], b.em[idx], pa, pb);
            st += filon(a.total[idx], b.total[idx], pa, pb);
        }
    }
    let h = b.k - a.k;
    PanelValue { em: se.re * h, total: st.re * h }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    /// electromagnetic energy
    pub energy: f64,
    /// energy including the polarization and magnetization terms
    pub energy_total: f64,
    pub lf: f64,
    pub mf: f64,
    pub hf: f64,
    /// relative quadrature error estimate of `energy`
    pub error: f64,
}

/// Refinement nodes kept for reuse across time samples; beyond this they
/// are rebuilt on demand.
const CACHE_NODES: usize = 200_000;

struct Integrator<'a> {
    builder: ModeBuilder<'a>,
    profile: InitialDataProfile,
    base: Vec<Arc<Node>>,
    /// region index of each base panel
    regions: Vec<usize>,
    cache: Mutex<HashMap<u64, Arc<Node>>>,
    opts: QuadratureOptions,
}

#[derive(Default)]
struct Accumulator {
    value: PanelValue,
    error: f64,
    unresolved: bool,
    nodes: usize,
}

impl<'a> Integrator<'a> {
    fn build(
        solver: &'a DispersionSolver,
        profile: &InitialDataProfile,
        t_max: f64,
        opts: QuadratureOptions,
    ) -> Result<Self, DecayError> {
        let spec = solver.spec();
        let builder = ModeBuilder::new(solver)?;
        let grid = k_grid(spec, profile, t_max, opts.points_per_decade.max(2));
        let raw: Vec<Vec<C>> = grid.par_iter().map(|&k| solver.roots_at_k(k)).collect::<Result<_, _>>()?;
        let mut ordered: Vec<Vec<C>> = Vec::with_capacity(raw.len());
        for roots in raw {
            let next = match ordered.last() {
                None => roots,
                Some(prev) => follow(prev, roots),
            };
            ordered.push(next);
        }
        let base: Vec<Arc<Node>> = grid
            .par_iter()
            .zip(ordered.into_par_iter())
            .map(|(&k, r)| builder.node(profile, k, r).map(Arc::new))
            .collect::<Result<_, _>>()?;
        let cuts = region_cuts(spec);
        let regions = base
            .windows(2)
            .map(|w| {
                let mid = (w[0].k * w[1].k).sqrt();
                if mid < cuts.low {
                    0
                } else if mid < cuts.high {
                    1
                } else {
                    2
                }
            })
            .collect();
        Ok(Integrator { builder, profile: *profile, base, regions, cache: Mutex::new(HashMap::new()), opts })
    }

    fn midpoint(&self, a: &Node, b: &Node) -> Result<Arc<Node>, DecayError> {
        let k = (a.k * b.k).sqrt();
        let key = k.to_bits();
        if let Some(n) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(n.clone());
        }
        let node = Arc::new(self.builder.node_after(&self.profile, k, &a.lambda)?);
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_NODES {
            return Ok(node);
        }
        Ok(cache.entry(key).or_insert(node).clone())
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(
        &self,
        a: &Arc<Node>,
        b: &Arc<Node>,
        whole: PanelValue,
        t: f64,
        tol: f64,
        depth: usize,
        acc: &mut Accumulator,
    ) -> Result<(), DecayError> {
        acc.nodes += 1;
        if acc.nodes > self.opts.max_nodes {
            return Err(DecayError::QuadratureFailure { t, estimate: f64::INFINITY, tol: self.opts.rel_tol });
        }
        let m = self.midpoint(a, b)?;
        let left = panel(a, &m, t, false);
        let right = panel(&m, b, t, false);
        let fine = left + right;
        let err = (fine.em - whole.em).abs();
        if err <= tol || depth >= self.opts.max_depth {
            acc.value = acc.value + fine;
            acc.error += err / 3.0;
            if err > tol {
                acc.unresolved = true;
            }
            return Ok(());
        }
        self.refine(a, &m, left, t, 0.5 * tol, depth + 1, acc)?;
        self.refine(&m, b, right, t, 0.5 * tol, depth + 1, acc)
    }

    fn sample(&self, t: f64) -> Result<EnergySample, DecayError> {
        let scale: f64 = self.base.windows(2).map(|w| panel(&w[0], &w[1], t, true).em.abs()).sum();
        let span = (self.base[self.base.len() - 1].k / self.base[0].k).ln();
        let mut regions = [Accumulator::default(), Accumulator::default(), Accumulator::default()];
        for (w, &r) in self.base.windows(2).zip(&self.regions) {
            let share = (w[1].k / w[0].k).ln() / span;
            let tol = 0.5 * self.opts.rel_tol * scale * share;
            let whole = panel(&w[0], &w[1], t, false);
            self.refine(&w[0], &w[1], whole, t, tol, 0, &mut regions[r])?;
        }
        let energy: f64 = regions.iter().map(|a| a.value.em).sum();
        let error = regions.iter().map(|a| a.error).sum::<f64>() / energy.abs().max(f64::MIN_POSITIVE);
        if regions.iter().any(|a| a.unresolved) && error > self.opts.rel_tol || !(energy > 0.0) {
            return Err(DecayError::QuadratureFailure { t, estimate: error, tol: self.opts.rel_tol });
        }
        Ok(EnergySample {
            t,
            energy,
            energy_total: regions.iter().map(|a| a.value.total).sum(),
            lf: regions[0].value.em,
            mf: regions[1].value.em,
            hf: regions[2].value.em,
            error,
        })
    }
}

fn samples(
    spec: &MaterialSpec,
    profile: &InitialDataProfile,
    times: &[f64],
    opts: QuadratureOptions,
) -> Result<Vec<EnergySample>, DecayError> {
    profile.validate()?;
    if times.is_empty() || times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(DecayError::InvalidInput("times must be finite and nonnegative".into()));
    }
    let solver = DispersionSolver::new(spec)?;
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let integ = Integrator::build(&solver, profile, t_max, opts)?;
    times
        .par_iter()
        .map(|&t| {
            integ.sample(t).map_err(|e| match e {
                DecayError::QuadratureFailure { estimate, tol, .. } => DecayError::QuadratureFailure { t, estimate, tol },
                e => e,
            })
        })
        .collect()
}

/// Electromagnetic energy `½∫(ε₀|E|²+μ₀|H|²)` at time `t`.
pub fn total_energy(spec: &MaterialSpec, profile: &InitialDataProfile, t: f64) -> Result<f64, DecayError> {
    Ok(samples(spec, profile, &[t], QuadratureOptions::default())?[0].energy)
}

/// Energy sample (with the region split and total energy) at time `t`.
pub fn energy_sample(
    spec: &MaterialSpec,
    profile: &InitialDataProfile,
    t: f64,
    opts: QuadratureOptions,
) -> Result<EnergySample, DecayError> {
    Ok(samples(spec, profile, &[t], opts)?[0])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    /// `−slope`
    pub exponent: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub samples: Vec<EnergySample>,
    pub cuts: RegionCuts,
    /// fit over the last sampled decade, when it is stable
    pub fit: Option<DecayFit>,
}

impl EnergyTrace {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.energy).collect()
    }

    /// Last decade of the sampled times.
    pub fn last_decade(&self) -> (f64, f64) {
        let t1 = self.samples.last().map(|s| s.t).unwrap_or(0.0);
        (t1 / 10.0, t1)
    }

    /// Largest relative increase of the total energy between samples, or 0.
    /// The electromagnetic part alone may oscillate.
    pub fn monotonicity_defect(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].energy_total - w[0].energy_total) / w[0].energy_total)
            .fold(0.0, f64::max)
    }
}

/// Energy at each time of `t_grid`, with the region breakdown.
pub fn energy_trace(spec: &MaterialSpec, profile: &InitialDataProfile, t_grid: &[f64]) -> Result<EnergyTrace, DecayError> {
    energy_trace_with(spec, profile, t_grid, QuadratureOptions::default())
}

pub fn energy_trace_with(
    spec: &MaterialSpec,
    profile: &InitialDataProfile,
    t_grid: &[f64],
    opts: QuadratureOptions,
) -> Result<EnergyTrace, DecayError> {
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DecayError::InvalidInput("time grid must be strictly increasing".into()));
    }
    let samples = samples(spec, profile, t_grid, opts)?;
    let mut trace = EnergyTrace { samples, cuts: region_cuts(spec), fit: None };
    let window = trace.last_decade();
    trace.fit = fit_decay_exponent(&trace, window).ok();
    Ok(trace)
}

/// Least-squares slope of `ln ℰ` against `ln t` over `window`.
pub fn fit_decay_exponent(trace: &EnergyTrace, window: (f64, f64)) -> Result<DecayFit, DecayError> {
    fit_power_law(&trace.times(), &trace.energies(), window)
}

/// Same fit on raw samples; points outside `window` are ignored.
pub fn fit_power_law(times: &[f64], energies: &[f64], window: (f64, f64)) -> Result<DecayFit, DecayError> {
    if times.len() != energies.len() {
        return Err(DecayError::InvalidInput("times and energies differ in length".into()));
    }
    let tol = 1e-12 * window.1.abs();
    let (times, energies): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(energies)
        .filter(|(t, _)| **t >= window.0 - tol && **t <= window.1 + tol)
        .map(|(t, e)| (*t, *e))
        .unzip();
    if times.len() < 3 {
        return Err(DecayError::InvalidInput("fit window holds fewer than three samples".into()));
    }
    if times.iter().chain(&energies).any(|v| !(*v > 0.0)) {
        return Err(DecayError::InvalidInput("fit needs positive times and energies".into()));
    }
    let lx: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = energies.iter().map(|e| e.ln()).collect();
    let LinearFit { slope, r_squared, .. } =
        linear_fit(&lx, &ly).ok_or_else(|| DecayError::InvalidInput("degenerate fit window".into()))?;
    if r_squared < MIN_R_SQUARED {
        return Err(DecayError::RegressionUnstable { r_squared });
    }
    Ok(DecayFit { slope, exponent: -slope, r_squared, window })
}

/// `min(s_eff, p + 3/2)` with `s_eff = s` for strongly and `s/2` for weakly
/// dissipative media; 0 for non-dissipative media, whose energy does not
/// decay.
pub fn predicted_exponent(spec: &MaterialSpec, profile: &InitialDataProfile) -> f64 {
    let d = classify_dissipativity(spec);
    if !d.dissipative {
        return 0.0;
    }
    let s_eff = if d.weakly_dissipative { profile.s / 2.0 } else { profile.s };
    s_eff.min(profile.p + 1.5)
}

/// Slowest per-mode energy decay rate `2·min(−Im ω)` over `[k_lo, k_hi]`.
pub fn slowest_rate(spec: &MaterialSpec, k_lo: f64, k_hi: f64, points: usize) -> Result<f64, DecayError> {
    let solver = DispersionSolver::new(spec)?;
    let mut best = f64::INFINITY;
    for k in logspace(k_lo, k_hi, points.max(2)) {
        for r in solver.roots_at_k(k)? {
            best = best.min(-2.0 * r.im);
        }
    }
    Ok(best)
}

/// Whether a channel carries an oscillator with zero resonance.
pub fn has_drude_term(spec: &MaterialSpec, channel: Channel) -> bool {
    spec.oscillators(channel).iter().any(|o| o.resonance == 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modal::spectral_decomposition;
    use crate::quad::{integrate, QuadOptions};

    fn strong() -> MaterialSpec {
        MaterialSpec::new(1.0, 1.0, vec![Oscillator::new(1.0, 1.0, 0.5)], vec![Oscillator::new(0.8, 2.0, 0.3)]).unwrap()
    }

    #[test]
    fn profile_shape() {
        let p = InitialDataProfile::new(1.0, 2.0);
        assert!((p.tail_exponent() - 4.55).abs() < 1e-15);
        assert_eq!(p.g(0.0), 0.0);
        let q = p.with_support(1.0, 2.0);
        assert_eq!(q.g(0.5), 0.0);
        assert!(q.g(1.5) > 0.0);
        assert!(InitialDataProfile { tail_margin: 0.0, ..p }.validate().is_err());
    }

    #[test]
    fn mode_components_match_projectors() {
        let spec = strong();
        let solver = DispersionSolver::new(&spec).unwrap();
        let b = ModeBuilder::new(&solver).unwrap();
        for k in [0.05, 1.3, 20.0] {
            let roots = solver.roots_at_k(k).unwrap();
            let comps = b.components(k, &roots).unwrap();
            let sys = build_modal(&spec, k, 1).unwrap();
            let d = spectral_decomposition(&sys).unwrap();
            let u0 = sys.field_state(C::new(1.0, 0.0), C::new(1.0, 0.0));
            for (r, a) in roots.iter().zip(&comps) {
                let c = d.components.iter().min_by(|x, y| (x.eigenvalue - r).norm().total_cmp(&(y.eigenvalue - r).norm())).unwrap();
                let proj = &c.projector * &u0;
                assert!((proj - a).norm() < 1e-8 * (1.0 + a.norm()), "k={k}");
            }
        }
    }

    #[test]
    fn initial_energy_matches_direct_integral() {
        let spec = strong();
        let prof = InitialDataProfile::new(0.0, 2.0);
        let e = total_energy(&spec, &prof, 0.0).unwrap();
        let direct = integrate(
            |k: f64| 0.5 * FOUR_PI * (spec.eps0() + spec.mu0()) * prof.g(k).powi(2) * k * k,
            &[0.0, 1.0, 10.0, 100.0, 1e4],
            QuadOptions::default(),
        )
        .unwrap()
        .value;
        let tail = FOUR_PI * 1e4f64.powf(-2.0 * prof.tail_exponent() + 3.0) / (2.0 * prof.tail_exponent() - 3.0);
        assert!((e - direct - tail).abs() / direct < 1e-6, "{e} vs {direct}");
    }

    #[test]
    fn energy_decreases_and_total_dominates() {
        let spec = strong();
        let prof = InitialDataProfile::new(0.0, 2.0);
        let tr = energy_trace(&spec, &prof, &logspace(0.1, 100.0, 7)).unwrap();
        assert!(tr.monotonicity_defect() < 1e-3);
        for s in &tr.samples {
            assert!(s.energy <= s.energy_total * (1.0 + 1e-9));
            assert!((s.lf + s.mf + s.hf - s.energy).abs() < 1e-12 * s.energy);
        }
    }

    #[test]
    fn amplitude_scaling() {
        let spec = strong();
        let p1 = InitialDataProfile::new(1.0, 1.0);
        let p2 = p1.with_amplitude(2.0);
        let a = total_energy(&spec, &p1, 3.0).unwrap();
        let b = total_energy(&spec, &p2, 3.0).unwrap();
        assert!((b / a - 4.0).abs() < 1e-12);
    }

    #[test]
    fn conservative_total_is_constant() {
        let spec =
            MaterialSpec::new(1.0, 1.0, vec![Oscillator::undamped(1.0, 1.0)], vec![Oscillator::undamped(0.5, 2.0)]).unwrap();
        let prof = InitialDataProfile::new(0.0, 2.0);
        let opts = QuadratureOptions::default();
        let e0 = energy_sample(&spec, &prof, 0.0, opts).unwrap();
        for t in [1.0, 10.0, 100.0] {
            let e = energy_sample(&spec, &prof, t, opts).unwrap();
            assert!((e.energy_total - e0.energy_total).abs() < 1e-6 * e0.energy_total);
            assert!(e.energy <= e0.energy_total);
        }
    }

    #[test]
    fn synthetic_fits() {
        let ts = logspace(1.0, 100.0, 30);
        let e3: Vec<f64> = ts.iter().map(|t| t.powf(-3.0)).collect();
        let f = fit_power_law(&ts, &e3, (1.0, 100.0)).unwrap();
        assert!((f.slope + 3.0).abs() < 1e-12);
        let mixed: Vec<f64> = ts.iter().map(|&t| if t < 10.0 { 1.0 } else { t.powf(-3.0) }).collect();
        let f = fit_power_law(&ts, &mixed, (10.0, 100.0)).unwrap();
        assert!((f.slope + 3.0).abs() < 1e-12);
        let ts = logspace(1e3, 1e4, 30);
        let e: Vec<f64> = ts.iter().map(|t| t.powf(-2.0) + t.powf(-4.0)).collect();
        let f = fit_power_law(&ts, &e, (1e3, 1e4)).unwrap();
        assert!((f.slope + 2.0).abs() < 0.02);
        let noisy: Vec<f64> = ts.iter().enumerate().map(|(i, _)| if i % 2 == 0 { 1.0 } else { 10.0 }).collect();
        assert!(matches!(fit_power_law(&ts, &noisy, (1e3, 1e4)), Err(DecayError::RegressionUnstable { .. })));
    }

    #[test]
    fn predicted_exponents() {
        let s = strong();
        assert_eq!(predicted_exponent(&s, &InitialDataProfile::new(0.0, 4.0)), 1.5);
        assert_eq!(predicted_exponent(&s, &InitialDataProfile::new(3.0, 1.0)), 1.0);
        let weak = MaterialSpec::new(
            1.0,
            1.0,
            vec![Oscillator::undamped(1.0, 1.0), Oscillator::new(0.8, 2.0, 0.3)],
            vec![],
        )
        .unwrap();
        assert_eq!(predicted_exponent(&weak, &InitialDataProfile::new(3.0, 2.0)), 1.0);
        assert_eq!(predicted_exponent(&MaterialSpec::vacuum(), &InitialDataProfile::new(0.0, 1.0)), 0.0);
    }
}
