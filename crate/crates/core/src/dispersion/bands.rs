//! Spectral bands and group velocity of non-dissipative media.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Anchor, BranchSet, DispersionError, DispersionSolver};
use crate::material::MaterialSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// positive group velocity, ω increasing in |k|
    Forward,
    /// negative group velocity
    Backward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    /// 1-based, in increasing frequency order
    pub index: usize,
    /// label of the branch sweeping this band
    pub branch: usize,
    pub lower: f64,
    /// `None` for the unbounded band
    pub upper: Option<f64>,
    pub orientation: Orientation,
}

impl Band {
    pub fn contains(&self, w: f64) -> bool {
        w >= self.lower && self.upper.map_or(true, |u| w <= u)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandStructure {
    pub bands: Vec<Band>,
    pub gaps: Vec<Gap>,
    pub forward_set: Vec<usize>,
    pub backward_set: Vec<usize>,
    pub negative_index: bool,
}

/// Bands `[min(z,p), max(z,p)]` of the nonnegative branches. The
/// orientation is read from the sign of ε inside the band.
pub fn band_structure(spec: &MaterialSpec, branch_set: &BranchSet) -> Result<BandStructure, DispersionError> {
    if spec.is_dissipative() {
        return Err(DispersionError::AssumptionViolated { flag: "non_dissipative" });
    }
    let mut bands: Vec<Band> = Vec::new();
    for b in branch_set.nonnegative() {
        let z = b.start.re;
        let (lower, upper, probe) = match b.end {
            Anchor::Finite { re, .. } => {
                let (lo, hi) = if re < z { (re, z) } else { (z, re) };
                (lo, Some(hi), 0.5 * (lo + hi))
            }
            Anchor::Infinity => (z, None, z + z.max(1.0)),
        };
        let eps = spec.epsilon(Complex64::new(probe, 0.0))?.re;
        let orientation = if eps > 0.0 { Orientation::Forward } else { Orientation::Backward };
        bands.push(Band { index: 0, branch: b.index, lower, upper, orientation });
    }
    bands.sort_by(|a, b| a.lower.total_cmp(&b.lower));
    for (i, b) in bands.iter_mut().enumerate() {
        b.index = i + 1;
    }
    let mut gaps = Vec::new();
    if let Some(first) = bands.first() {
        if first.lower > 0.0 {
            gaps.push(Gap { lower: 0.0, upper: first.lower });
        }
    }
    for w in bands.windows(2) {
        if let Some(u) = w[0].upper {
            if u < w[1].lower {
                gaps.push(Gap { lower: u, upper: w[1].lower });
            }
        }
    }
    let forward_set: Vec<usize> =
        bands.iter().filter(|b| b.orientation == Orientation::Forward).map(|b| b.index).collect();
    let backward_set: Vec<usize> =
        bands.iter().filter(|b| b.orientation == Orientation::Backward).map(|b| b.index).collect();
    Ok(BandStructure { negative_index: !backward_set.is_empty(), bands, gaps, forward_set, backward_set })
}

/// Counts grid frequencies in `(0, omega_max]` where band membership
/// disagrees with `εμ > 0`, or where the band orientation disagrees with
/// the common sign of ε and μ. Points within `guard` of a band endpoint
/// are skipped.
pub fn characterization_defects(
    spec: &MaterialSpec,
    structure: &BandStructure,
    points: usize,
    omega_max: f64,
    guard: f64,
) -> Result<usize, DispersionError> {
    let mut ends: Vec<f64> = Vec::new();
    for b in &structure.bands {
        ends.push(b.lower);
        ends.extend(b.upper);
    }
    for o in spec.electric().iter().chain(spec.magnetic()) {
        ends.push(o.resonance);
    }
    let mut defects = 0;
    for i in 1..=points {
        let w = omega_max * i as f64 / points as f64;
        if ends.iter().any(|e| (w - e).abs() <= guard * e.abs().max(1.0)) {
            continue;
        }
        let z = Complex64::new(w, 0.0);
        let (e, m) = (spec.epsilon(z)?.re, spec.mu(z)?.re);
        let band = structure.bands.iter().find(|b| b.contains(w));
        match band {
            None if e * m > 0.0 => defects += 1,
            Some(_) if e * m <= 0.0 => defects += 1,
            Some(b) => {
                let want = if e > 0.0 { Orientation::Forward } else { Orientation::Backward };
                if b.orientation != want {
                    defects += 1;
                }
            }
            None => {}
        }
    }
    Ok(defects)
}

/// `dω/d|k| = 2|k| / 𝒟'(ω_n(|k|))` on the n-th nonnegative branch
/// (1-based, ordered by frequency at this wavenumber).
pub fn group_velocity(spec: &MaterialSpec, n: usize, k: f64) -> Result<f64, DispersionError> {
    if spec.is_dissipative() {
        return Err(DispersionError::AssumptionViolated { flag: "non_dissipative" });
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(DispersionError::InvalidInput(format!("wavenumber must be positive, got {k}")));
    }
    let solver = DispersionSolver::new(spec)?;
    let mut pos: Vec<Complex64> = solver.roots_at_k(k)?.into_iter().filter(|w| w.re > 0.0).collect();
    pos.sort_by(|a, b| a.re.total_cmp(&b.re));
    if n == 0 || n > pos.len() {
        return Err(DispersionError::InvalidInput(format!("branch {n} out of range 1..={}", pos.len())));
    }
    let w = pos[n - 1];
    let d = solver.derivative(w)?;
    if d == Complex64::new(0.0, 0.0) || !d.re.is_finite() {
        return Err(DispersionError::DerivativeVanishes { omega: w });
    }
    Ok(2.0 * k / d.re)
}
