//! Generalized Lorentz material laws: evaluation of ε, μ and the dispersion
//! symbol, pole/zero location, structural assumptions and passivity sampling.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{clustered_roots, symmetrize_conjugate, Poly, PolyError, RootCluster, CLUSTER_TOL};

/// Vacuum permittivity in SI units.
pub const EPS0_SI: f64 = 1e-9 / (36.0 * PI);
/// Vacuum permeability in SI units.
pub const MU0_SI: f64 = 4e-7 * PI;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("{channel} oscillator {index}: {reason}")]
    InvalidOscillator { channel: Channel, index: usize, reason: String },
    #[error("{field} must be a positive finite number")]
    InvalidBackground { field: &'static str },
    #[error("{channel} oscillators {first} and {second} share the same (damping, resonance) pair")]
    DuplicateOscillator { channel: Channel, first: usize, second: usize },
    #[error("frequency {omega} is a pole of the material law")]
    PoleHit { omega: Complex64 },
    #[error("ill-conditioned root computation: {0}")]
    IllConditioned(#[from] PolyError),
}

impl MaterialError {
    pub fn code(&self) -> &'static str {
        match self {
            MaterialError::InvalidOscillator { .. } => "material.invalid_oscillator",
            MaterialError::InvalidBackground { .. } => "material.invalid_background",
            MaterialError::DuplicateOscillator { .. } => "material.duplicate_oscillator",
            MaterialError::PoleHit { .. } => "material.pole_hit",
            MaterialError::IllConditioned(_) => "material.ill_conditioned",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Electric,
    Magnetic,
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Channel::Electric => "electric",
            Channel::Magnetic => "magnetic",
        })
    }
}

/// One Lorentz oscillator `Ω² / (ω₀² − iαω − ω²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Oscillator {
    pub coupling: f64,
    pub resonance: f64,
    pub damping: f64,
}

impl Oscillator {
    pub fn new(coupling: f64, resonance: f64, damping: f64) -> Self {
        Oscillator { coupling, resonance, damping }
    }

    pub fn undamped(coupling: f64, resonance: f64) -> Self {
        Oscillator::new(coupling, resonance, 0.0)
    }

    fn check(&self) -> Result<(), String> {
        let finite = self.coupling.is_finite() && self.resonance.is_finite() && self.damping.is_finite();
        if !finite {
            return Err("parameters must be finite".into());
        }
        if self.coupling <= 0.0 {
            return Err("coupling must be positive".into());
        }
        if self.resonance < 0.0 {
            return Err("resonance must be nonnegative".into());
        }
        if self.damping < 0.0 {
            return Err("damping must be nonnegative".into());
        }
        Ok(())
    }

    pub fn is_damped(&self) -> bool {
        self.damping > 0.0
    }

    /// `ω₀² − iαω − ω²`
    pub fn denominator(&self, omega: Complex64) -> Complex64 {
        self.resonance * self.resonance - I * self.damping * omega - omega * omega
    }

    /// Susceptibility term `Ω² / (ω₀² − iαω − ω²)`.
    pub fn response(&self, omega: Complex64) -> Result<Complex64, MaterialError> {
        let d = self.denominator(omega);
        if d == Complex64::new(0.0, 0.0) {
            return Err(MaterialError::PoleHit { omega });
        }
        Ok(self.coupling * self.coupling / d)
    }

    /// Derivative of [`Oscillator::response`] with respect to ω.
    pub fn response_derivative(&self, omega: Complex64) -> Complex64 {
        let d = self.denominator(omega);
        self.coupling * self.coupling * (I * self.damping + 2.0 * omega) / (d * d)
    }

    /// Denominator `s² + αs + ω₀²` in the variable `s = −iω`.
    pub fn quadratic(&self) -> Poly {
        Poly::quadratic(self.damping, self.resonance * self.resonance)
    }

    /// The two poles in the ω plane (both in the closed lower half-plane).
    pub fn poles(&self) -> [Complex64; 2] {
        let a = self.damping;
        let disc = Complex64::new(a * a - 4.0 * self.resonance * self.resonance, 0.0).sqrt();
        let s1 = (-a + disc) * 0.5;
        let s2 = (-a - disc) * 0.5;
        [I * s1, I * s2]
    }
}

/// A material: background constants plus electric and magnetic oscillators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct MaterialSpec {
    eps0: f64,
    mu0: f64,
    electric: Vec<Oscillator>,
    magnetic: Vec<Oscillator>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawSpec {
    eps0: f64,
    mu0: f64,
    electric: Vec<Oscillator>,
    magnetic: Vec<Oscillator>,
}

impl TryFrom<RawSpec> for MaterialSpec {
    type Error = MaterialError;
    fn try_from(r: RawSpec) -> Result<Self, Self::Error> {
        MaterialSpec::new(r.eps0, r.mu0, r.electric, r.magnetic)
    }
}

impl From<MaterialSpec> for RawSpec {
    fn from(m: MaterialSpec) -> Self {
        RawSpec { eps0: m.eps0, mu0: m.mu0, electric: m.electric, magnetic: m.magnetic }
    }
}

impl MaterialSpec {
    pub fn new(
        eps0: f64,
        mu0: f64,
        electric: Vec<Oscillator>,
        magnetic: Vec<Oscillator>,
    ) -> Result<Self, MaterialError> {
        if !(eps0.is_finite() && eps0 > 0.0) {
            return Err(MaterialError::InvalidBackground { field: "eps0" });
        }
        if !(mu0.is_finite() && mu0 > 0.0) {
            return Err(MaterialError::InvalidBackground { field: "mu0" });
        }
        for (channel, list) in [(Channel::Electric, &electric), (Channel::Magnetic, &magnetic)] {
            for (index, osc) in list.iter().enumerate() {
                osc.check()
                    .map_err(|reason| MaterialError::InvalidOscillator { channel, index, reason })?;
            }
            for i in 0..list.len() {
                for j in (i + 1)..list.len() {
                    if list[i].damping == list[j].damping && list[i].resonance == list[j].resonance {
                        return Err(MaterialError::DuplicateOscillator { channel, first: i, second: j });
                    }
                }
            }
        }
        Ok(MaterialSpec { eps0, mu0, electric, magnetic })
    }

    /// Vacuum with normalized constants.
    pub fn vacuum() -> Self {
        MaterialSpec { eps0: 1.0, mu0: 1.0, electric: vec![], magnetic: vec![] }
    }

    /// Normalized Drude material `ε = 1 − Ωe²/ω²`, `μ = 1 − Ωm²/ω²`.
    pub fn drude(omega_e: f64, omega_m: f64) -> Result<Self, MaterialError> {
        MaterialSpec::new(
            1.0,
            1.0,
            vec![Oscillator::undamped(omega_e, 0.0)],
            vec![Oscillator::undamped(omega_m, 0.0)],
        )
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn electric(&self) -> &[Oscillator] {
        &self.electric
    }

    pub fn magnetic(&self) -> &[Oscillator] {
        &self.magnetic
    }

    pub fn oscillators(&self, channel: Channel) -> &[Oscillator] {
        match channel {
            Channel::Electric => &self.electric,
            Channel::Magnetic => &self.magnetic,
        }
    }

    pub fn background(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Electric => self.eps0,
            Channel::Magnetic => self.mu0,
        }
    }

    /// Total number of oscillators `N = N_e + N_m`.
    pub fn n(&self) -> usize {
        self.electric.len() + self.magnetic.len()
    }

    /// Vacuum light speed `c = (ε₀μ₀)^{-1/2}`.
    pub fn light_speed(&self) -> f64 {
        1.0 / (self.eps0 * self.mu0).sqrt()
    }

    pub fn is_dissipative(&self) -> bool {
        self.electric.iter().chain(&self.magnetic).any(Oscillator::is_damped)
    }

    fn characteristic_frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        self.electric
            .iter()
            .chain(&self.magnetic)
            .map(|o| (o.resonance * o.resonance + o.coupling * o.coupling).sqrt())
    }

    /// Largest characteristic frequency `sqrt(ω₀² + Ω²)`, or 1 for vacuum.
    pub fn omega_max(&self) -> f64 {
        let m = self.characteristic_frequencies().fold(0.0, f64::max);
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }

    /// Smallest characteristic frequency `sqrt(ω₀² + Ω²)`, or 1 for vacuum.
    pub fn omega_min(&self) -> f64 {
        let m = self.characteristic_frequencies().fold(f64::INFINITY, f64::min);
        if m.is_finite() {
            m
        } else {
            1.0
        }
    }

    /// Largest resonance, coupling or damping value (at least 1).
    pub fn parameter_scale(&self) -> f64 {
        self.electric
            .iter()
            .chain(&self.magnetic)
            .flat_map(|o| [o.resonance, o.coupling, o.damping])
            .fold(1.0, f64::max)
    }

    pub fn response(&self, channel: Channel, omega: Complex64) -> Result<Complex64, MaterialError> {
        let mut sum = Complex64::new(1.0, 0.0);
        for o in self.oscillators(channel) {
            sum += o.response(omega)?;
        }
        Ok(self.background(channel) * sum)
    }

    /// Derivative of ε or μ with respect to ω.
    pub fn response_derivative(&self, channel: Channel, omega: Complex64) -> Complex64 {
        self.background(channel)
            * self
                .oscillators(channel)
                .iter()
                .map(|o| o.response_derivative(omega))
                .sum::<Complex64>()
    }

    pub fn epsilon(&self, omega: Complex64) -> Result<Complex64, MaterialError> {
        self.response(Channel::Electric, omega)
    }

    pub fn mu(&self, omega: Complex64) -> Result<Complex64, MaterialError> {
        self.response(Channel::Magnetic, omega)
    }

    /// Rational symbol of ε (electric) or μ (magnetic) in `s = −iω`.
    pub fn channel_symbol(&self, channel: Channel) -> RationalSymbol {
        let oscs = self.oscillators(channel);
        let quads: Vec<Poly> = oscs.iter().map(Oscillator::quadratic).collect();
        let den = Poly::product(&quads);
        let mut num = den.clone();
        for (j, o) in oscs.iter().enumerate() {
            let others = Poly::product(quads.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, q)| q));
            num = num.add(&others.scale(o.coupling * o.coupling));
        }
        RationalSymbol::new(num.scale(self.background(channel)), den).reduce_with(&quads)
    }
}

/// Permittivity ε(ω).
pub fn eval_epsilon(spec: &MaterialSpec, omega: Complex64) -> Result<Complex64, MaterialError> {
    spec.epsilon(omega)
}

/// Permeability μ(ω).
pub fn eval_mu(spec: &MaterialSpec, omega: Complex64) -> Result<Complex64, MaterialError> {
    spec.mu(omega)
}

/// Rational function `numerator(s) / denominator(s)` with real coefficients
/// in `s = −iω`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalSymbol {
    pub numerator: Poly,
    pub denominator: Poly,
}

/// Poles and zeros of a rational symbol in the ω plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolesZeros {
    pub zeros: Vec<RootCluster>,
    pub poles: Vec<RootCluster>,
}

impl PolesZeros {
    pub fn zero_count(&self) -> usize {
        self.zeros.iter().map(|r| r.multiplicity).sum()
    }

    pub fn pole_count(&self) -> usize {
        self.poles.iter().map(|r| r.multiplicity).sum()
    }
}

fn to_omega(s: Complex64) -> Complex64 {
    I * s
}

impl RationalSymbol {
    pub fn new(numerator: Poly, denominator: Poly) -> Self {
        assert!(!denominator.is_zero(), "denominator must be nonzero");
        RationalSymbol { numerator, denominator }
    }

    /// Cancels every candidate factor that divides both numerator and
    /// denominator, repeatedly. The candidates are the oscillator quadratics
    /// and `s`, which are the only possible common factors for Lorentz media.
    pub fn reduce_with(mut self, candidates: &[Poly]) -> Self {
        let mut all: Vec<Poly> = candidates.to_vec();
        all.push(Poly::monomial(1));
        loop {
            let mut changed = false;
            for f in &all {
                if self.denominator.degree() < f.degree() {
                    continue;
                }
                if let (Some(n), Some(d)) = (self.numerator.try_divide(f), self.denominator.try_divide(f)) {
                    self.numerator = n;
                    self.denominator = d;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        self
    }

    pub fn eval(&self, omega: Complex64) -> Result<Complex64, MaterialError> {
        let s = -I * omega;
        let d = self.denominator.eval(s);
        if d == Complex64::new(0.0, 0.0) {
            return Err(MaterialError::PoleHit { omega });
        }
        Ok(self.numerator.eval(s) / d)
    }

    /// Derivative with respect to ω.
    pub fn eval_derivative(&self, omega: Complex64) -> Result<Complex64, MaterialError> {
        let s = -I * omega;
        let (n, dn) = self.numerator.eval_with_derivative(s);
        let (d, dd) = self.denominator.eval_with_derivative(s);
        if d == Complex64::new(0.0, 0.0) {
            return Err(MaterialError::PoleHit { omega });
        }
        Ok(-I * (dn * d - n * dd) / (d * d))
    }

    pub fn poles_and_zeros(&self) -> Result<PolesZeros, MaterialError> {
        let map = |v: Vec<RootCluster>| -> Vec<RootCluster> {
            let mut out: Vec<RootCluster> =
                v.into_iter().map(|r| RootCluster { value: to_omega(r.value), ..r }).collect();
            out.sort_by(|a, b| a.value.re.total_cmp(&b.value.re).then(a.value.im.total_cmp(&b.value.im)));
            out
        };
        let zeros = if self.numerator.degree() == 0 { vec![] } else { clustered_roots(&self.numerator)? };
        let poles = if self.denominator.degree() == 0 { vec![] } else { clustered_roots(&self.denominator)? };
        Ok(PolesZeros { zeros: map(zeros), poles: map(poles) })
    }
}

/// Symbol of `𝒟(ω) = ω² ε(ω) μ(ω)` after cancelling common factors.
pub fn dispersion_symbol(spec: &MaterialSpec) -> RationalSymbol {
    let e = spec.channel_symbol(Channel::Electric);
    let m = spec.channel_symbol(Channel::Magnetic);
    // ω² = −s²
    let num = Poly::monomial(2).scale(-1.0).mul(&e.numerator).mul(&m.numerator);
    let den = e.denominator.mul(&m.denominator);
    let quads: Vec<Poly> = spec.electric.iter().chain(&spec.magnetic).map(Oscillator::quadratic).collect();
    RationalSymbol::new(num, den).reduce_with(&quads)
}

pub fn poles_and_zeros(sym: &RationalSymbol) -> Result<PolesZeros, MaterialError> {
    sym.poles_and_zeros()
}

/// Resonances of one channel, as signed sets.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSets {
    /// `{±ω₀ : α = 0}`
    pub all: Vec<f64>,
    /// resonances that are not resonances of the other channel
    pub simple: Vec<f64>,
    /// resonances shared with the other channel
    pub double: Vec<f64>,
}

/// Dissipativity classification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dissipativity {
    pub dissipative: bool,
    pub e_n_d: bool,
    pub m_n_d: bool,
    pub weakly_dissipative: bool,
    pub strongly_dissipative: bool,
    /// For weakly dissipative media, the channel owning the undamped
    /// resonance responsible for the `|k|⁻⁴` branch.
    pub weak_resonance_channel: Option<Channel>,
    pub resonances_e: ResonanceSets,
    pub resonances_m: ResonanceSets,
}

/// Poles/zeros of ε and μ, assumption flags and dissipativity class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub poles_e: Vec<RootCluster>,
    pub zeros_e: Vec<RootCluster>,
    pub poles_m: Vec<RootCluster>,
    pub zeros_m: Vec<RootCluster>,
    pub assumption1_ok: bool,
    pub assumption2_ok: bool,
    pub assumption3_ok: bool,
    #[serde(flatten)]
    pub dissipativity: Dissipativity,
}

impl StructureReport {
    pub fn all_assumptions_ok(&self) -> bool {
        self.assumption1_ok && self.assumption2_ok && self.assumption3_ok
    }
}

fn same_frequency(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn signed_set(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        for x in [v, -v] {
            if !out.iter().any(|&y| same_frequency(x, y)) {
                out.push(x);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

fn resonance_sets(own: &[Oscillator], other: &[Oscillator]) -> ResonanceSets {
    let all = signed_set(own.iter().filter(|o| !o.is_damped()).map(|o| o.resonance));
    let other_res = signed_set(other.iter().filter(|o| !o.is_damped()).map(|o| o.resonance));
    let (double, simple): (Vec<f64>, Vec<f64>) =
        all.iter().partition(|&&x| other_res.iter().any(|&y| same_frequency(x, y)));
    ResonanceSets { all, simple, double }
}

/// Dissipativity classification.
///
/// A medium is weakly dissipative when an undamped resonance of one channel
/// meets a non-dissipative partner channel, so that the leading `|k|⁻²`
/// damping of the resonant branch vanishes: either ε is non-dissipative and
/// μ has a simple resonance, or μ is non-dissipative and ε has one.
pub fn classify_dissipativity(spec: &MaterialSpec) -> Dissipativity {
    let e_n_d = !spec.electric.iter().any(Oscillator::is_damped);
    let m_n_d = !spec.magnetic.iter().any(Oscillator::is_damped);
    let dissipative = !(e_n_d && m_n_d);
    let resonances_e = resonance_sets(&spec.electric, &spec.magnetic);
    let resonances_m = resonance_sets(&spec.magnetic, &spec.electric);
    let weak_resonance_channel = if !dissipative {
        None
    } else if m_n_d && !resonances_e.simple.is_empty() {
        Some(Channel::Electric)
    } else if e_n_d && !resonances_m.simple.is_empty() {
        Some(Channel::Magnetic)
    } else {
        None
    };
    let weakly_dissipative = weak_resonance_channel.is_some();
    Dissipativity {
        dissipative,
        e_n_d,
        m_n_d,
        weakly_dissipative,
        strongly_dissipative: dissipative && !weakly_dissipative,
        weak_resonance_channel,
        resonances_e,
        resonances_m,
    }
}

fn sets_intersect(a: &[RootCluster], b: &[RootCluster], tol: f64) -> bool {
    a.iter().any(|x| b.iter().any(|y| (x.value - y.value).norm() <= tol))
}

fn root_tol(sets: &[&[RootCluster]]) -> f64 {
    let scale = sets
        .iter()
        .flat_map(|s| s.iter())
        .map(|r| r.value.norm())
        .fold(1.0, f64::max);
    CLUSTER_TOL * scale * 10.0
}

/// Poles and zeros of ε and μ together with the three structural
/// assumptions: disjoint electric poles / magnetic zeros (and vice versa),
/// no pole at ω = 0, and pairwise root-disjoint oscillator denominators
/// within each channel.
pub fn validate_assumptions(spec: &MaterialSpec) -> Result<StructureReport, MaterialError> {
    let pe = spec.channel_symbol(Channel::Electric).poles_and_zeros()?;
    let pm = spec.channel_symbol(Channel::Magnetic).poles_and_zeros()?;
    let tol = root_tol(&[&pe.poles, &pe.zeros, &pm.poles, &pm.zeros]);
    let assumption1_ok = !sets_intersect(&pe.poles, &pm.zeros, tol) && !sets_intersect(&pm.poles, &pe.zeros, tol);
    let zero = [RootCluster { value: Complex64::new(0.0, 0.0), multiplicity: 1 }];
    let assumption2_ok = !sets_intersect(&pe.poles, &zero, tol) && !sets_intersect(&pm.poles, &zero, tol);
    let assumption3_ok = [&spec.electric, &spec.magnetic].iter().all(|list| {
        let roots: Vec<[Complex64; 2]> = list.iter().map(Oscillator::poles).collect();
        (0..roots.len()).all(|i| {
            ((i + 1)..roots.len()).all(|j| {
                roots[i].iter().all(|a| roots[j].iter().all(|b| (a - b).norm() > tol))
            })
        })
    });
    Ok(StructureReport {
        poles_e: pe.poles,
        zeros_e: pe.zeros,
        poles_m: pm.poles,
        zeros_m: pm.zeros,
        assumption1_ok,
        assumption2_ok,
        assumption3_ok,
        dissipativity: classify_dissipativity(spec),
    })
}

/// Minima of Im(ωε), Im(ωμ) and the worst reflection-symmetry defect over a
/// grid in the open upper half-plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HerglotzReport {
    pub points: usize,
    pub min_im_omega_eps: f64,
    pub min_im_omega_mu: f64,
    pub max_symmetry_defect: f64,
}

pub fn herglotz_sample(spec: &MaterialSpec, grid: &[Complex64]) -> Result<HerglotzReport, MaterialError> {
    let mut report = HerglotzReport {
        points: grid.len(),
        min_im_omega_eps: f64::INFINITY,
        min_im_omega_mu: f64::INFINITY,
        max_symmetry_defect: 0.0,
    };
    for &w in grid {
        for channel in [Channel::Electric, Channel::Magnetic] {
            let v = spec.response(channel, w)?;
            let mirrored = spec.response(channel, -w.conj())?;
            let im = (w * v).im;
            match channel {
                Channel::Electric => report.min_im_omega_eps = report.min_im_omega_eps.min(im),
                Channel::Magnetic => report.min_im_omega_mu = report.min_im_omega_mu.min(im),
            }
            let defect = (mirrored - v.conj()).norm() / v.norm().max(f64::MIN_POSITIVE);
            report.max_symmetry_defect = report.max_symmetry_defect.max(defect);
        }
    }
    Ok(report)
}

/// Log-polar grid in the open upper half-plane: `n_radial` radii
/// log-spaced in `[r_min, r_max]` times `n_angular` angles strictly inside
/// `(0, π)`.
pub fn log_polar_grid(n_radial: usize, n_angular: usize, r_min: f64, r_max: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n_radial * n_angular);
    for i in 0..n_radial {
        let t = if n_radial == 1 { 0.0 } else { i as f64 / (n_radial - 1) as f64 };
        let r = r_min * (r_max / r_min).powf(t);
        for j in 0..n_angular {
            let theta = PI * (j as f64 + 0.5) / n_angular as f64;
            out.push(Complex64::from_polar(r, theta));
        }
    }
    out
}

/// Re-exported for modules that symmetrize root sets in the ω plane.
pub(crate) fn symmetrize_omega(roots: Vec<RootCluster>, tol: f64) -> Vec<RootCluster> {
    // ω → −ω̄ corresponds to conjugation in s = −iω.
    let in_s: Vec<RootCluster> = roots.into_iter().map(|r| RootCluster { value: -I * r.value, ..r }).collect();
    let mut out: Vec<RootCluster> = symmetrize_conjugate(in_s, tol)
        .into_iter()
        .map(|r| RootCluster { value: I * r.value, ..r })
        .collect();
    out.sort_by(|a, b| a.value.re.total_cmp(&b.value.re).then(a.value.im.total_cmp(&b.value.im)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one_electric(o: Oscillator) -> MaterialSpec {
        MaterialSpec::new(1.0, 1.0, vec![o], vec![]).unwrap()
    }

    #[test]
    fn epsilon_examples() {
        let s = one_electric(Oscillator::undamped(1.0, 2.0));
        assert!((s.epsilon(c(1.0, 0.0)).unwrap() - c(4.0 / 3.0, 0.0)).norm() < 1e-15);
        let s = one_electric(Oscillator::new(1.0, 2.0, 1.0));
        assert!((s.epsilon(c(1.0, 0.0)).unwrap() - c(1.3, 0.1)).norm() < 1e-15);
        assert_eq!(MaterialSpec::vacuum().epsilon(c(3.0, -2.0)).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn mu_examples() {
        let d = MaterialSpec::drude(1.0, 2.0).unwrap();
        assert!(d.mu(c(2.0, 0.0)).unwrap().norm() < 1e-15);
        let s = MaterialSpec::new(1.0, 1.0, vec![], vec![Oscillator::new(1.0, 1.0, 0.5)]).unwrap();
        let v = s.mu(c(0.0, 1.0)).unwrap();
        assert!((v - c(1.4, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn pole_hit_is_reported() {
        let s = one_electric(Oscillator::undamped(1.0, 2.0));
        assert!(matches!(s.epsilon(c(2.0, 0.0)), Err(MaterialError::PoleHit { .. })));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(MaterialSpec::new(0.0, 1.0, vec![], vec![]).is_err());
        assert!(matches!(
            MaterialSpec::new(1.0, 1.0, vec![Oscillator::undamped(0.0, 1.0)], vec![]),
            Err(MaterialError::InvalidOscillator { .. })
        ));
        let dup = MaterialSpec::new(1.0, 1.0, vec![Oscillator::undamped(1.0, 2.0), Oscillator::undamped(3.0, 2.0)], vec![]);
        assert!(matches!(dup, Err(MaterialError::DuplicateOscillator { .. })));
    }

    #[test]
    fn vacuum_symbol() {
        let sym = dispersion_symbol(&MaterialSpec::vacuum());
        let w = c(0.7, 0.2);
        assert!((sym.eval(w).unwrap() - w * w).norm() < 1e-15);
    }

    #[test]
    fn drude_symbol_is_reduced() {
        let sym = dispersion_symbol(&MaterialSpec::drude(1.0, 2.0).unwrap());
        assert_eq!(sym.numerator.degree(), 4);
        assert_eq!(sym.denominator.degree(), 2);
        let w = c(0.3, 1.1);
        let want = (w * w - 1.0) * (w * w - 4.0) / (w * w);
        assert!((sym.eval(w).unwrap() - want).norm() < 1e-13);
        let pz = sym.poles_and_zeros().unwrap();
        assert_eq!(pz.poles.len(), 1);
        assert_eq!(pz.poles[0].multiplicity, 2);
        assert_eq!(pz.poles[0].value, c(0.0, 0.0));
        let mut z: Vec<f64> = pz.zeros.iter().map(|r| r.value.re).collect();
        z.sort_by(f64::total_cmp);
        for (a, b) in z.iter().zip([-2.0, -1.0, 1.0, 2.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn lorentz_poles_and_zeros() {
        let sym = dispersion_symbol(&one_electric(Oscillator::undamped(1.0, 2.0)));
        let pz = sym.poles_and_zeros().unwrap();
        let poles: Vec<f64> = pz.poles.iter().map(|r| r.value.re).collect();
        assert_eq!(poles.len(), 2);
        assert!((poles[0] + 2.0).abs() < 1e-13 && (poles[1] - 2.0).abs() < 1e-13);
        let zero = pz.zeros.iter().find(|r| r.value.norm() < 1e-12).unwrap();
        assert_eq!(zero.multiplicity, 2);
        let five = pz.zeros.iter().find(|r| r.value.re > 1.0).unwrap();
        assert!((five.value.re - 5f64.sqrt()).abs() < 1e-13);
        assert_eq!(pz.zero_count(), 4);
        assert_eq!(pz.pole_count(), 2);
    }

    #[test]
    fn overdamped_poles_on_imaginary_axis() {
        let s = one_electric(Oscillator::new(1.0, 2.0, 4.0));
        let pz = s.channel_symbol(Channel::Electric).poles_and_zeros().unwrap();
        assert_eq!(pz.poles.len(), 1);
        assert_eq!(pz.poles[0].multiplicity, 2);
        assert!((pz.poles[0].value - c(0.0, -2.0)).norm() < 1e-7);
        let s = one_electric(Oscillator::new(1.0, 2.0, 5.0));
        let pz = s.channel_symbol(Channel::Electric).poles_and_zeros().unwrap();
        for p in &pz.poles {
            assert_eq!(p.value.re, 0.0);
            assert!(p.value.im < 0.0);
        }
    }

    #[test]
    fn assumption_flags() {
        let d = validate_assumptions(&MaterialSpec::drude(1.0, 2.0).unwrap()).unwrap();
        assert!(!d.assumption2_ok);
        assert!(d.assumption1_ok && d.assumption3_ok);
        let v = validate_assumptions(&MaterialSpec::vacuum()).unwrap();
        assert!(v.all_assumptions_ok());
        // zero of ε at ω² = 5 coincides with a pole of μ
        let bad = MaterialSpec::new(
            1.0,
            1.0,
            vec![Oscillator::undamped(1.0, 2.0)],
            vec![Oscillator::undamped(1.0, 5f64.sqrt())],
        )
        .unwrap();
        assert!(!validate_assumptions(&bad).unwrap().assumption1_ok);
    }

    #[test]
    fn classification() {
        let nd = classify_dissipativity(&one_electric(Oscillator::undamped(1.0, 2.0)));
        assert!(!nd.dissipative && !nd.weakly_dissipative && !nd.strongly_dissipative);
        let strong = MaterialSpec::new(
            1.0,
            1.0,
            vec![Oscillator::new(1.0, 2.0, 0.5)],
            vec![Oscillator::new(1.0, 3.0, 0.2)],
        )
        .unwrap();
        let c = classify_dissipativity(&strong);
        assert!(c.strongly_dissipative && !c.weakly_dissipative);
        // undamped electric resonance, non-dissipative μ, damping elsewhere in ε
        let weak = MaterialSpec::new(
            1.0,
            1.0,
            vec![Oscillator::undamped(1.0, 1.0), Oscillator::new(1.0, 3.0, 0.5)],
            vec![],
        )
        .unwrap();
        let c = classify_dissipativity(&weak);
        assert!(c.weakly_dissipative);
        assert_eq!(c.weak_resonance_channel, Some(Channel::Electric));
        assert_eq!(c.resonances_e.simple, vec![-1.0, 1.0]);
    }

    #[test]
    fn shared_resonance_is_double() {
        let s = MaterialSpec::new(
            1.0,
            1.0,
            vec![Oscillator::undamped(1.0, 2.0)],
            vec![Oscillator::undamped(3.0, 2.0), Oscillator::new(1.0, 1.0, 0.3)],
        )
        .unwrap();
        let c = classify_dissipativity(&s);
        assert_eq!(c.resonances_e.double, vec![-2.0, 2.0]);
        assert_eq!(c.resonances_e.double, c.resonances_m.double);
        assert!(c.resonances_e.simple.is_empty());
        assert!(c.strongly_dissipative);
    }

    #[test]
    fn herglotz_examples() {
        let g = log_polar_grid(5, 5, 0.1, 10.0);
        let v = herglotz_sample(&MaterialSpec::vacuum(), &g).unwrap();
        let min_im = g.iter().map(|w| w.im).fold(f64::INFINITY, f64::min);
        assert!((v.min_im_omega_eps - min_im).abs() < 1e-15);
        let s = one_electric(Oscillator::undamped(1.0, 1.0));
        let r = herglotz_sample(&s, &[c(0.0, 1.0)]).unwrap();
        assert!((r.min_im_omega_eps - 1.5).abs() < 1e-15);
    }
}
