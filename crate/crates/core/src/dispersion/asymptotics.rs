//! Closed-form damping coefficients of dissipative branches and their
//! verification by log-log regression on traced branches.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Anchor, BranchSet, DispersionError};
use crate::fit::power_law_fit;
use crate::material::{validate_assumptions, Channel, MaterialSpec, Oscillator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsymptoticKind {
    /// `Im ω ≈ −A/(2c²|k|²)` as `|k| → ∞`
    HfOrder2,
    /// `Im ω ≈ −A/(2c⁴|k|⁴)` as `|k| → ∞`, coefficient fitted only
    HfOrder4,
    /// `Im ω ≈ −A c²|k|²` as `|k| → 0`
    LfOrder2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticEntry {
    /// real pole (high frequency) or real zero (low frequency) of 𝒟
    pub anchor: f64,
    pub kind: AsymptoticKind,
    pub coefficient: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCoefficients {
    pub a_infinity: f64,
    pub light_speed: f64,
    pub entries: Vec<AsymptoticEntry>,
}

impl AsymptoticCoefficients {
    /// Entry of the given kind anchored at `w`.
    pub fn find(&self, w: f64, low_frequency: bool) -> Option<&AsymptoticEntry> {
        let tol = 1e-7 * w.abs().max(1.0);
        self.entries.iter().find(|e| {
            (e.kind == AsymptoticKind::LfOrder2) == low_frequency && (e.anchor - w).abs() <= tol
        })
    }
}

fn undamped_at(oscs: &[Oscillator], p: f64) -> Option<&Oscillator> {
    oscs.iter().find(|o| !o.is_damped() && (o.resonance - p.abs()).abs() <= 1e-12 * o.resonance.max(1.0))
}

fn damping_sum(oscs: &[Oscillator], skip: &Oscillator, p: f64) -> f64 {
    oscs.iter()
        .filter(|o| !std::ptr::eq(*o, skip))
        .map(|o| {
            let q = o.denominator(Complex64::new(p, 0.0));
            o.coupling * o.coupling * o.damping / q.norm_sqr()
        })
        .sum()
}

/// High-frequency and low-frequency damping coefficients of a dissipative
/// medium.
pub fn asymptotic_coefficients(spec: &MaterialSpec) -> Result<AsymptoticCoefficients, DispersionError> {
    if !spec.is_dissipative() {
        return Err(DispersionError::AssumptionViolated { flag: "dissipative" });
    }
    let structure = validate_assumptions(spec)?;
    let d = &structure.dissipativity;
    let c = spec.light_speed();
    let (eps0, mu0) = (spec.eps0(), spec.mu0());
    let a_infinity: f64 = spec
        .electric()
        .iter()
        .chain(spec.magnetic())
        .map(|o| o.damping * o.coupling * o.coupling)
        .sum();
    let mut entries = Vec::new();

    for &p in &d.resonances_e.simple {
        let o = undamped_at(spec.electric(), p).expect("resonance comes from an oscillator");
        let entry = if d.m_n_d {
            AsymptoticEntry { anchor: p, kind: AsymptoticKind::HfOrder4, coefficient: None }
        } else {
            let pm = Complex64::new(p, 0.0) * spec.mu(Complex64::new(p, 0.0))?;
            let a = 0.5 * eps0 * pm.im * o.coupling * o.coupling;
            AsymptoticEntry { anchor: p, kind: AsymptoticKind::HfOrder2, coefficient: Some(a) }
        };
        entries.push(entry);
    }
    for &p in &d.resonances_m.simple {
        let o = undamped_at(spec.magnetic(), p).expect("resonance comes from an oscillator");
        let entry = if d.e_n_d {
            AsymptoticEntry { anchor: p, kind: AsymptoticKind::HfOrder4, coefficient: None }
        } else {
            let pe = Complex64::new(p, 0.0) * spec.epsilon(Complex64::new(p, 0.0))?;
            let a = 0.5 * mu0 * pe.im * o.coupling * o.coupling;
            AsymptoticEntry { anchor: p, kind: AsymptoticKind::HfOrder2, coefficient: Some(a) }
        };
        entries.push(entry);
    }
    for &p in &d.resonances_e.double {
        let oe = undamped_at(spec.electric(), p).expect("electric resonance");
        let om = undamped_at(spec.magnetic(), p).expect("magnetic resonance");
        let a = p * p
            * (0.5 * om.coupling * om.coupling * damping_sum(spec.electric(), oe, p)
                + 0.5 * oe.coupling * oe.coupling * damping_sum(spec.magnetic(), om, p));
        entries.push(AsymptoticEntry { anchor: p, kind: AsymptoticKind::HfOrder2, coefficient: Some(a) });
    }

    if structure.assumption2_ok {
        let s = |oscs: &[Oscillator]| -> f64 {
            oscs.iter().map(|o| o.damping * o.coupling * o.coupling / o.resonance.powi(4)).sum()
        };
        let a0 = 0.5 * eps0 * eps0 * c * c * s(spec.electric()) + 0.5 * mu0 * c * c * s(spec.magnetic());
        entries.push(AsymptoticEntry { anchor: 0.0, kind: AsymptoticKind::LfOrder2, coefficient: Some(a0) });
    }
    let tol = 1e-9 * spec.omega_max();
    for (zeros, own, other) in [
        (&structure.zeros_e, Channel::Electric, Channel::Magnetic),
        (&structure.zeros_m, Channel::Magnetic, Channel::Electric),
    ] {
        for z in zeros.iter().filter(|z| z.value.im.abs() <= tol && z.value.re.abs() > tol) {
            let w = Complex64::new(z.value.re, 0.0);
            // (ωε)'(z) = ε(z) + zε'(z) = zε'(z) at a zero of ε
            let dprod = spec.response(own, w)? + w * spec.response_derivative(own, w);
            let partner = w * spec.response(other, w)?;
            let a = -(1.0 / (dprod * partner)).im / (c * c);
            entries.push(AsymptoticEntry { anchor: z.value.re, kind: AsymptoticKind::LfOrder2, coefficient: Some(a) });
        }
    }
    entries.sort_by(|a, b| a.anchor.total_cmp(&b.anchor));
    Ok(AsymptoticCoefficients { a_infinity, light_speed: c, entries })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    HighFrequency,
    LowFrequency,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::HighFrequency => "high_frequency",
            Regime::LowFrequency => "low_frequency",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub branch: usize,
    pub regime: Regime,
    pub kind: AsymptoticKind,
    pub anchor: Option<f64>,
    pub expected_exponent: f64,
    pub fitted_exponent: f64,
    /// fitted coefficient in the normalization of [`AsymptoticKind`]
    pub fitted_coefficient: f64,
    pub closed_form: Option<f64>,
    pub relative_defect: Option<f64>,
    pub r_squared: f64,
    pub k_min: f64,
    pub k_max: f64,
}

fn is_real(w: Complex64) -> bool {
    w.im.abs() <= 1e-9 * (1.0 + w.re.abs())
}

/// Fits `−Im ω` against `|k|` on the last decade (high frequency) and the
/// first decade (low frequency) of the grid for every branch with a real
/// anchor, and compares with the closed forms where available.
pub fn verify_asymptotics(
    branch_set: &BranchSet,
    coeffs: &AsymptoticCoefficients,
) -> Result<Vec<AsymptoticReport>, DispersionError> {
    if !branch_set.dissipative {
        return Err(DispersionError::AssumptionViolated { flag: "dissipative" });
    }
    let ks = &branch_set.k_grid;
    let k_last = ks[ks.len() - 1];
    let k_first = ks.iter().copied().find(|&k| k > 0.0).unwrap_or(k_last);
    let hf: Vec<usize> = (0..ks.len()).filter(|&i| ks[i] >= 0.1 * k_last).collect();
    let lf: Vec<usize> = (0..ks.len()).filter(|&i| ks[i] > 0.0 && ks[i] <= 10.0 * k_first).collect();
    let c2 = coeffs.light_speed * coeffs.light_speed;
    let mut out = Vec::new();

    for b in &branch_set.branches {
        let hf_case = match b.end {
            Anchor::Infinity => Some((AsymptoticKind::HfOrder2, None, Some(coeffs.a_infinity))),
            Anchor::Finite { re, im } if is_real(Complex64::new(re, im)) => {
                coeffs.find(re, false).map(|e| (e.kind, Some(re), e.coefficient))
            }
            _ => None,
        };
        if let Some((kind, anchor, closed)) = hf_case {
            let (expected, scale) = match kind {
                AsymptoticKind::HfOrder4 => (-4.0, 2.0 * c2 * c2),
                _ => (-2.0, 2.0 * c2),
            };
            out.push(fit_report(b.index, Regime::HighFrequency, kind, anchor, expected, scale, closed, ks, &b.values, &hf)?);
        }
        if is_real(b.start) {
            if let Some(e) = coeffs.find(b.start.re, true) {
                out.push(fit_report(
                    b.index,
                    Regime::LowFrequency,
                    AsymptoticKind::LfOrder2,
                    Some(e.anchor),
                    2.0,
                    1.0 / c2,
                    e.coefficient,
                    ks,
                    &b.values,
                    &lf,
                )?);
            }
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn fit_report(
    branch: usize,
    regime: Regime,
    kind: AsymptoticKind,
    anchor: Option<f64>,
    expected: f64,
    scale: f64,
    closed: Option<f64>,
    ks: &[f64],
    values: &[Complex64],
    idx: &[usize],
) -> Result<AsymptoticReport, DispersionError> {
    let xs: Vec<f64> = idx.iter().map(|&i| ks[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| -values[i].im).collect();
    let unstable = |r2: f64| DispersionError::RegressionUnstable { branch, regime: regime.to_string(), r_squared: r2 };
    let fit = power_law_fit(&xs, &ys).ok_or_else(|| unstable(f64::NAN))?;
    if !(fit.r_squared >= 0.999) {
        return Err(unstable(fit.r_squared));
    }
    let fitted_coefficient = fit.intercept.exp() * scale;
    Ok(AsymptoticReport {
        branch,
        regime,
        kind,
        anchor,
        expected_exponent: expected,
        fitted_exponent: fit.slope,
        fitted_coefficient,
        closed_form: closed,
        relative_defect: closed.map(|a| (fitted_coefficient / a - 1.0).abs()),
        r_squared: fit.r_squared,
        k_min: xs[0],
        k_max: xs[xs.len() - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{default_k_grid, trace_branches};

    #[test]
    fn a_infinity_example() {
        let spec = MaterialSpec::new(
            1.0,
            1.0,
            vec![Oscillator::new(1.0, 1.0, 0.5)],
            vec![Oscillator::new(2.0, 3.0, 0.25)],
        )
        .unwrap();
        let c = asymptotic_coefficients(&spec).unwrap();
        assert!((c.a_infinity - 1.5).abs() < 1e-15);
    }

    #[test]
    fn non_dissipative_refused() {
        let spec = MaterialSpec::new(1.0, 1.0, vec![Oscillator::undamped(1.0, 2.0)], vec![]).unwrap();
        assert!(asymptotic_coefficients(&spec).is_err());
    }

    #[test]
    fn zero_anchor_formula() {
        let spec = MaterialSpec::new(1.0, 1.0, vec![Oscillator::new(1.0, 2.0, 1.0)], vec![]).unwrap();
        let c = asymptotic_coefficients(&spec).unwrap();
        let e = c.find(0.0, true).unwrap();
        assert!((e.coefficient.unwrap() - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn unbounded_branches_fit() {
        let spec = MaterialSpec::new(
            1.0,
            1.0,
            vec![Oscillator::new(1.0, 1.0, 0.5)],
            vec![Oscillator::new(2.0, 3.0, 0.25)],
        )
        .unwrap();
        let set = trace_branches(&spec, &default_k_grid(&spec, 300)).unwrap();
        let coeffs = asymptotic_coefficients(&spec).unwrap();
        let reports = verify_asymptotics(&set, &coeffs).unwrap();
        let unbounded: Vec<&AsymptoticReport> = reports
            .iter()
            .filter(|r| r.regime == Regime::HighFrequency && r.anchor.is_none())
            .collect();
        assert_eq!(unbounded.len(), 2);
        for r in unbounded {
            assert!((r.fitted_exponent + 2.0).abs() < 0.05);
            assert!(r.relative_defect.unwrap() < 0.02);
        }
        let lf: Vec<&AsymptoticReport> = reports.iter().filter(|r| r.regime == Regime::LowFrequency).collect();
        assert!(lf.iter().any(|r| r.anchor == Some(0.0)));
        for r in lf {
            assert!((r.fitted_exponent - 2.0).abs() < 0.05);
        }
    }
}
