//! Nevanlinna measures of Lorentz media, reconstruction of ε/μ from the
//! measure, Stieltjes inversion and the time-domain susceptibility kernel.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::material::{Channel, MaterialError, MaterialSpec, Oscillator};
use crate::quad::{integrate, integrate_to_infinity, linspace, QuadError, QuadOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HerglotzError {
    #[error("ω = {omega} is not in the open upper half-plane")]
    Domain { omega: Complex64 },
    #[error("quadrature failure: {0}")]
    Quadrature(#[from] QuadError),
    #[error("η extrapolation did not converge (residual {residual:e}, last increment {increment:e})")]
    NonConvergent { residual: f64, increment: f64 },
    #[error("η sequence must hold at least two decreasing positive values")]
    BadEtaSequence,
    #[error("kernel transform truncation impossible: decay margin {margin} is not positive")]
    Truncation { margin: f64 },
    #[error(transparent)]
    Material(#[from] MaterialError),
}

impl HerglotzError {
    pub fn code(&self) -> &'static str {
        match self {
            HerglotzError::Domain { .. } => "herglotz.domain",
            HerglotzError::Quadrature(_) => "herglotz.quadrature_failure",
            HerglotzError::NonConvergent { .. } => "herglotz.non_convergent",
            HerglotzError::BadEtaSequence => "herglotz.bad_eta_sequence",
            HerglotzError::Truncation { .. } => "herglotz.truncation",
            HerglotzError::Material(e) => e.code(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub xi: f64,
    pub weight: f64,
}

/// Absolutely continuous part produced by one damped oscillator:
/// `ν(ξ) = Ω² (1/π) α ξ² / ((ξ² − ω₀²)² + α² ξ²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityTerm {
    pub coupling: f64,
    pub resonance: f64,
    pub damping: f64,
}

impl DensityTerm {
    pub fn value(&self, xi: f64) -> f64 {
        let a = self.damping;
        let w2 = self.resonance * self.resonance;
        let shape = if w2 == 0.0 {
            a / (xi * xi + a * a)
        } else {
            let d = xi * xi - w2;
            a * xi * xi / (d * d + a * a * xi * xi)
        };
        self.coupling * self.coupling * shape / PI
    }
}

/// Even positive measure `ν` with `ε(ω) = slope·(1 + ∫ dν(ξ)/(ξ² − ω²))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureRepresentation {
    pub channel: Channel,
    pub herglotz_slope: f64,
    pub point_masses: Vec<PointMass>,
    pub densities: Vec<DensityTerm>,
}

impl MeasureRepresentation {
    pub fn density(&self, xi: f64) -> f64 {
        self.densities.iter().map(|d| d.value(xi)).sum()
    }

    /// Total mass of the measure (equals `ΣΩ²`).
    pub fn total_mass(&self) -> f64 {
        self.point_masses.iter().map(|m| m.weight).sum::<f64>()
            + self.densities.iter().map(|d| d.coupling * d.coupling).sum::<f64>()
    }
}

/// Closed-form measure of one channel.
pub fn measure_of(spec: &MaterialSpec, channel: Channel) -> MeasureRepresentation {
    let mut point_masses = Vec::new();
    let mut densities = Vec::new();
    for o in spec.oscillators(channel) {
        let w = o.coupling * o.coupling;
        if o.is_damped() {
            densities.push(DensityTerm { coupling: o.coupling, resonance: o.resonance, damping: o.damping });
        } else if o.resonance == 0.0 {
            point_masses.push(PointMass { xi: 0.0, weight: w });
        } else {
            point_masses.push(PointMass { xi: -o.resonance, weight: 0.5 * w });
            point_masses.push(PointMass { xi: o.resonance, weight: 0.5 * w });
        }
    }
    point_masses.sort_by(|a, b| a.xi.total_cmp(&b.xi));
    MeasureRepresentation { channel, herglotz_slope: spec.background(channel), point_masses, densities }
}

fn density_integral(d: &DensityTerm, omega: Complex64) -> Result<Complex64, HerglotzError> {
    let f = |xi: f64| Complex64::new(d.value(xi), 0.0) / (xi * xi - omega * omega);
    let scale = d.resonance.max(d.damping).max(omega.norm()).max(1.0);
    let mut points = vec![0.0, omega.re.abs(), d.resonance, 0.5 * d.resonance, 2.0 * scale];
    points.retain(|p| *p <= 2.0 * scale);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-12, max_intervals: 4000 };
    let head = integrate(f, &points, opts)?;
    let tail = integrate_to_infinity(f, 2.0 * scale, opts)?;
    // even integrand: ∫_ℝ = 2∫_0^∞
    Ok((head.value + tail.value) * 2.0)
}

/// Evaluates `slope·(1 + ∫ dν(ξ)/(ξ² − ω²))` with point masses summed
/// exactly and densities integrated numerically.
pub fn reconstruct(measure: &MeasureRepresentation, omega: Complex64) -> Result<Complex64, HerglotzError> {
    if !(omega.im > 0.0) {
        return Err(HerglotzError::Domain { omega });
    }
    let mut sum = Complex64::new(1.0, 0.0);
    for m in &measure.point_masses {
        sum += m.weight / (m.xi * m.xi - omega * omega);
    }
    for d in &measure.densities {
        sum += density_integral(d, omega)?;
    }
    Ok(measure.herglotz_slope * sum)
}

/// Geometric sequence `η₀, η₀/2, η₀/4`.
pub fn default_eta_sequence(eta0: f64) -> Vec<f64> {
    vec![eta0, eta0 / 2.0, eta0 / 4.0]
}

/// Result of an η → 0 extrapolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub value: f64,
    pub samples: Vec<(f64, f64)>,
    pub residual: f64,
}

/// Polynomial (Neville) extrapolation to η = 0; on halving sequences this
/// is Richardson extrapolation.
fn extrapolate(samples: &[(f64, f64)]) -> Result<Extrapolation, HerglotzError> {
    let n = samples.len();
    let mut table: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let mut previous_order = table[n - 1];
    for m in 1..n {
        if m == n - 1 {
            previous_order = table[1];
        }
        for i in 0..(n - m) {
            let (hi, hj) = (samples[i].0, samples[i + m].0);
            table[i] = (hi * table[i + 1] - hj * table[i]) / (hi - hj);
        }
    }
    let value = table[0];
    let residual = (value - previous_order).abs();
    let increment = (samples[n - 1].1 - samples[n - 2].1).abs();
    let floor = 1e-12 * samples.iter().map(|s| s.1.abs()).fold(1.0, f64::max);
    if residual > 10.0 * increment.max(floor) {
        return Err(HerglotzError::NonConvergent { residual, increment });
    }
    Ok(Extrapolation { value, samples: samples.to_vec(), residual })
}

fn check_etas(etas: &[f64]) -> Result<(), HerglotzError> {
    let ok = etas.len() >= 2
        && etas.iter().all(|e| *e > 0.0 && e.is_finite())
        && etas.windows(2).all(|w| w[1] < w[0]);
    if ok {
        Ok(())
    } else {
        Err(HerglotzError::BadEtaSequence)
    }
}

/// `lim_{η→0} (2/π) ∫_a^b Im f(x + iη) dx`, which equals
/// `ν([a,b]) + ν((a,b))` for the Herglotz measure of `f`.
pub fn stieltjes_window<F>(f: F, a: f64, b: f64, etas: &[f64]) -> Result<Extrapolation, HerglotzError>
where
    F: Fn(Complex64) -> Complex64,
{
    check_etas(etas)?;
    let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 20000 };
    let mut samples = Vec::with_capacity(etas.len());
    for &eta in etas {
        let g = |x: f64| f(Complex64::new(x, eta)).im;
        let pieces = ((b - a) / eta).ceil().clamp(8.0, 256.0) as usize;
        let r = integrate(g, &linspace(a, b, pieces), opts)?;
        samples.push((eta, 2.0 / PI * r.value));
    }
    extrapolate(&samples)
}

/// `lim_{η→0} η Im f(a + iη)`, the atom of the Herglotz measure of `f` at `a`.
pub fn atom_weight<F>(f: F, a: f64, etas: &[f64]) -> Result<Extrapolation, HerglotzError>
where
    F: Fn(Complex64) -> Complex64,
{
    check_etas(etas)?;
    let samples: Vec<(f64, f64)> = etas.iter().map(|&eta| (eta, eta * f(Complex64::new(a, eta)).im)).collect();
    extrapolate(&samples)
}

/// Mass of an interval with chosen endpoint closure, combined from
/// [`stieltjes_window`] and [`atom_weight`]:
/// `ν((a,b)) = (W − ν{a} − ν{b}) / 2` with `W = ν([a,b]) + ν((a,b))`.
pub fn interval_mass<F>(
    f: F,
    a: f64,
    b: f64,
    closed_left: bool,
    closed_right: bool,
    etas: &[f64],
) -> Result<f64, HerglotzError>
where
    F: Fn(Complex64) -> Complex64,
{
    let w = stieltjes_window(&f, a, b, etas)?.value;
    let wa = atom_weight(&f, a, etas)?.value;
    let wb = atom_weight(&f, b, etas)?.value;
    let open = 0.5 * (w - wa - wb);
    Ok(open + if closed_left { wa } else { 0.0 } + if closed_right { wb } else { 0.0 })
}

/// Time-domain kernel `χ` solving `χ'' + αχ' + ω₀²χ = 0`, `χ(0) = 0`,
/// `χ'(0) = Ω²`, so that `∫₀^∞ χ(t) e^{iωt} dt = Ω²/(ω₀² − iαω − ω²)`.
pub fn susceptibility_kernel(osc: &Oscillator, t: f64) -> f64 {
    let w2 = osc.coupling * osc.coupling;
    let half = 0.5 * osc.damping;
    let disc = osc.resonance * osc.resonance - half * half;
    let envelope = (-half * t).exp();
    let shape = if disc > 0.0 {
        let beta = disc.sqrt();
        (beta * t).sin() / beta
    } else if disc < 0.0 {
        let gamma = (-disc).sqrt();
        // sinh(γt)/γ with the growing exponential folded into the envelope
        // to avoid overflow for large t
        let e = (-(half - gamma) * t).exp() * 0.5 * (1.0 - (-2.0 * gamma * t).exp()) / gamma;
        return w2 * e;
    } else {
        t
    };
    w2 * envelope * shape
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCheck {
    pub numeric: Complex64,
    pub closed_form: Complex64,
    pub defect: f64,
    pub truncation_time: f64,
}

/// Compares the numerical transform `∫₀^T χ(t) e^{iωt} dt` with the closed
/// form `Ω²/(ω₀² − iαω − ω²)`. No `1/√(2π)` factor appears: the kernel is
/// normalized so the transform equals the susceptibility exactly.
pub fn kernel_transform_check(osc: &Oscillator, omega: Complex64) -> Result<KernelCheck, HerglotzError> {
    let half = 0.5 * osc.damping;
    let gamma = (half * half - osc.resonance * osc.resonance).max(0.0).sqrt();
    let margin = omega.im + half - gamma;
    if !(margin > 0.0) {
        return Err(HerglotzError::Truncation { margin });
    }
    let closed_form = osc.response(omega)?;
    let w2 = osc.coupling * osc.coupling;
    // |χ(t) e^{iωt}| ≤ Ω² t e^{−margin t}; tail ≤ Ω² e^{−rT}(T/r + 1/r²)
    let target = 1e-14 * closed_form.norm();
    let tail = |t: f64| w2 * (-margin * t).exp() * (t / margin + 1.0 / (margin * margin));
    let mut big_t = 1.0 / margin;
    while tail(big_t) > target {
        big_t *= 1.25;
    }
    let f = |t: f64| (Complex64::new(0.0, 1.0) * omega * t).exp() * susceptibility_kernel(osc, t);
    let freq = omega.re.abs().max(osc.resonance).max(margin);
    let periods = (big_t * freq / (2.0 * PI)).ceil().clamp(4.0, 20000.0) as usize;
    let opts = QuadOptions { abs_tol: 1e-15 * closed_form.norm(), rel_tol: 1e-12, max_intervals: 200000 };
    let r = integrate(f, &linspace(0.0, big_t, periods), opts)?;
    let defect = (r.value - closed_form).norm() / closed_form.norm();
    Ok(KernelCheck { numeric: r.value, closed_form, defect, truncation_time: big_t })
}
