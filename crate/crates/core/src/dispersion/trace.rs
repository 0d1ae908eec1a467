//! Continuation of the roots of `𝒟(ω) = |k|²` along a wavenumber grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DispersionError, DispersionSolver};
use crate::assign::min_cost_assignment;
use crate::fit::logspace;
use crate::material::MaterialSpec;

/// Limit of a branch as `|k| → ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Anchor {
    Finite { re: f64, im: f64 },
    Infinity,
}

impl Anchor {
    pub fn value(&self) -> Option<Complex64> {
        match *self {
            Anchor::Finite { re, im } => Some(Complex64::new(re, im)),
            Anchor::Infinity => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// 1-based label; finite-limit branches first, the two unbounded last.
    pub index: usize,
    /// `ω(|k|)` at every grid point.
    pub values: Vec<Complex64>,
    /// zero of 𝒟 reached at `|k| = 0`
    pub start: Complex64,
    pub end: Anchor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSet {
    pub k_grid: Vec<f64>,
    pub branches: Vec<Branch>,
    pub light_speed: f64,
    pub dissipative: bool,
    /// grid points inserted by refinement (not part of `k_grid`)
    pub refinements: usize,
    /// wavenumbers where matching stayed ambiguous after refinement
    pub suspected_swaps: Vec<f64>,
}

impl BranchSet {
    /// Branches with positive real part just after `k = 0`, ordered by
    /// their starting frequency. For non-dissipative media these are the
    /// representatives of the `±` pairs.
    pub fn nonnegative(&self) -> Vec<&Branch> {
        let j = self.k_grid.iter().position(|&k| k > 0.0).unwrap_or(0);
        let mut out: Vec<&Branch> = self.branches.iter().filter(|b| b.values[j].re > 0.0).collect();
        out.sort_by(|a, b| a.start.re.total_cmp(&b.start.re).then(a.values[j].re.total_cmp(&b.values[j].re)));
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TraceOptions {
    /// maximum bisection depth per grid interval
    pub max_depth: usize,
    /// total number of inserted points across the trace
    pub max_refinements: usize,
    /// return [`DispersionError::BranchSwapSuspected`] instead of recording
    pub strict: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { max_depth: 16, max_refinements: 4000, strict: false }
    }
}

/// `k = 0` plus `points` log-spaced wavenumbers over `[10⁻³, 10⁴]·scale`
/// with `scale = max(resonances, 1)`.
pub fn default_k_grid(spec: &MaterialSpec, points: usize) -> Vec<f64> {
    let scale = spec.electric().iter().chain(spec.magnetic()).map(|o| o.resonance).fold(1.0, f64::max);
    let mut g = vec![0.0];
    g.extend(logspace(1e-3 * scale, 1e4 * scale, points));
    g
}

pub fn trace_branches(spec: &MaterialSpec, k_grid: &[f64]) -> Result<BranchSet, DispersionError> {
    let solver = DispersionSolver::new(spec)?;
    trace_branches_with(&solver, k_grid, TraceOptions::default())
}

struct Tracer<'a> {
    solver: &'a DispersionSolver,
    opts: TraceOptions,
    refinements: usize,
    swaps: Vec<f64>,
}

/// Distance from `v[i]` to the nearest other point not equal to it.
fn separation(v: &[Complex64], i: usize) -> f64 {
    v.iter()
        .filter(|w| **w != v[i])
        .map(|w| (w - v[i]).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Optimal matching of `next` onto `prev`, and whether every move is
/// shorter than half the separation of its anchor (previous roots when
/// `against_prev`, otherwise the new roots)
/// (`true` means the matching is unambiguous).
fn match_roots(prev: &[Complex64], next: &[Complex64], against_prev: bool) -> (Vec<Complex64>, bool) {
    let cost: Vec<Vec<f64>> = prev.iter().map(|a| next.iter().map(|b| (a - b).norm()).collect()).collect();
    let sigma = min_cost_assignment(&cost);
    let out: Vec<Complex64> = sigma.iter().map(|&j| next[j]).collect();
    let safe = (0..prev.len()).all(|i| {
        let gap = if against_prev { separation(prev, i) } else { separation(next, sigma[i]) };
        cost[i][sigma[i]] < 0.5 * gap
    });
    (out, safe)
}

impl Tracer<'_> {
    /// First step away from the zeros: coincident anchors are allowed, so
    /// the displacement is compared with the gap between distinct zeros.
    fn leave_zeros(&mut self, zeros: &[Complex64], k: f64, depth: usize) -> Result<Vec<Complex64>, DispersionError> {
        let next = self.solver.roots_at_k(k)?;
        let mut distinct: Vec<Complex64> = Vec::new();
        for z in zeros {
            if !distinct.iter().any(|d| d == z) {
                distinct.push(*z);
            }
        }
        let (mut out, safe) = match_roots(zeros, &next, true);
        if !safe {
            if depth < self.opts.max_depth && self.refinements < self.opts.max_refinements {
                self.refinements += 1;
                let mid = self.leave_zeros(zeros, 0.25 * k, depth + 1)?;
                return self.advance(&mid, 0.25 * k, k, depth + 1);
            }
            self.report(k)?;
        }
        // ties within a multiple zero: hand out roots in real-part order
        for d in &distinct {
            let idx: Vec<usize> = (0..zeros.len()).filter(|&i| zeros[i] == *d).collect();
            let mut vals: Vec<Complex64> = idx.iter().map(|&i| out[i]).collect();
            vals.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            for (i, v) in idx.into_iter().zip(vals) {
                out[i] = v;
            }
        }
        Ok(out)
    }

    fn advance(&mut self, prev: &[Complex64], k0: f64, k1: f64, depth: usize) -> Result<Vec<Complex64>, DispersionError> {
        let next = self.solver.roots_at_k(k1)?;
        let (out, safe) = match_roots(prev, &next, false);
        if safe {
            return Ok(out);
        }
        if depth < self.opts.max_depth && self.refinements < self.opts.max_refinements {
            self.refinements += 1;
            let mid = if k0 > 0.0 { (k0 * k1).sqrt() } else { 0.5 * k1 };
            let vm = self.advance(prev, k0, mid, depth + 1)?;
            return self.advance(&vm, mid, k1, depth + 1);
        }
        self.report(k1)?;
        Ok(out)
    }

    fn report(&mut self, k: f64) -> Result<(), DispersionError> {
        if self.opts.strict {
            return Err(DispersionError::BranchSwapSuspected { k });
        }
        if self.swaps.last() != Some(&k) {
            self.swaps.push(k);
        }
        Ok(())
    }
}

/// Traces all branches over `k_grid`, which must start at 0 and increase
/// strictly. End anchors are identified at the last grid point: the two
/// largest roots are the unbounded branches, the rest are matched to the
/// poles of 𝒟.
pub fn trace_branches_with(
    solver: &DispersionSolver,
    k_grid: &[f64],
    opts: TraceOptions,
) -> Result<BranchSet, DispersionError> {
    if k_grid.len() < 2 || k_grid[0] != 0.0 {
        return Err(DispersionError::InvalidInput("k grid must start at 0 and have at least two points".into()));
    }
    if k_grid.windows(2).any(|w| !(w[1] > w[0])) || !k_grid[k_grid.len() - 1].is_finite() {
        return Err(DispersionError::InvalidInput("k grid must be strictly increasing and finite".into()));
    }
    let zeros = solver.roots_at_k(0.0)?;
    let mut tracer = Tracer { solver, opts, refinements: 0, swaps: Vec::new() };
    let mut columns: Vec<Vec<Complex64>> = vec![zeros.clone()];
    let first = tracer.leave_zeros(&zeros, k_grid[1], 0)?;
    columns.push(first);
    for w in k_grid[1..].windows(2) {
        let prev = columns.last().expect("nonempty");
        let next = tracer.advance(prev, w[0], w[1], 0)?;
        columns.push(next);
    }

    let n = zeros.len();
    let last = &columns[columns.len() - 1];
    let mut by_size: Vec<usize> = (0..n).collect();
    by_size.sort_by(|&a, &b| last[b].norm().total_cmp(&last[a].norm()));
    let unbounded: Vec<usize> = by_size.iter().take(2.min(n)).copied().collect();
    let finite: Vec<usize> = (0..n).filter(|i| !unbounded.contains(i)).collect();
    let pole_values: Vec<Complex64> =
        solver.poles().iter().flat_map(|p| std::iter::repeat(p.value).take(p.multiplicity)).collect();
    let mut ends = vec![Anchor::Infinity; n];
    if !finite.is_empty() && pole_values.len() >= finite.len() {
        let cost: Vec<Vec<f64>> =
            finite.iter().map(|&i| pole_values.iter().map(|p| (last[i] - p).norm()).collect()).collect();
        let sigma = min_cost_assignment(&cost);
        for (r, &i) in finite.iter().enumerate() {
            let p = pole_values[sigma[r]];
            ends[i] = Anchor::Finite { re: p.re, im: p.im };
        }
    }

    let mut branches: Vec<Branch> = (0..n)
        .map(|i| Branch {
            index: 0,
            values: columns.iter().map(|c| c[i]).collect(),
            start: zeros[i],
            end: ends[i],
        })
        .collect();
    let key = |b: &Branch| match b.end {
        Anchor::Finite { re, im } => (0, re, im, b.start.re),
        Anchor::Infinity => (1, b.values[b.values.len() - 1].re, 0.0, b.start.re),
    };
    branches.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
            .then(ka.3.total_cmp(&kb.3))
    });
    for (i, b) in branches.iter_mut().enumerate() {
        b.index = i + 1;
    }
    Ok(BranchSet {
        k_grid: k_grid.to_vec(),
        branches,
        light_speed: solver.spec().light_speed(),
        dissipative: solver.spec().is_dissipative(),
        refinements: tracer.refinements,
        suspected_swaps: tracer.swaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::Oscillator;

    #[test]
    fn drude_branches() {
        let spec = MaterialSpec::drude(1.0, 2.0).unwrap();
        let set = trace_branches(&spec, &default_k_grid(&spec, 200)).unwrap();
        assert_eq!(set.branches.len(), 4);
        assert!(set.suspected_swaps.is_empty());
        let pos = set.nonnegative();
        assert_eq!(pos.len(), 2);
        assert!((pos[0].start.re - 1.0).abs() < 1e-12);
        assert_eq!(pos[0].end, Anchor::Finite { re: 0.0, im: 0.0 });
        assert!((pos[1].start.re - 2.0).abs() < 1e-12);
        assert_eq!(pos[1].end, Anchor::Infinity);
        // branch 1 decreasing, branch 2 increasing
        assert!(pos[0].values.windows(2).all(|w| w[1].re < w[0].re));
        assert!(pos[1].values.windows(2).all(|w| w[1].re > w[0].re));
    }

    #[test]
    fn vacuum_single_nonnegative_branch() {
        let spec = MaterialSpec::vacuum();
        let grid = default_k_grid(&spec, 50);
        let set = trace_branches(&spec, &grid).unwrap();
        let pos = set.nonnegative();
        assert_eq!(pos.len(), 1);
        for (w, k) in pos[0].values.iter().zip(&grid) {
            assert!((w.re - k).abs() <= 1e-14 * k.max(1.0));
        }
    }

    #[test]
    fn labels_follow_pole_order() {
        let spec = MaterialSpec::new(
            1.0,
            1.0,
            vec![Oscillator::new(1.0, 2.0, 0.2)],
            vec![Oscillator::new(0.5, 1.0, 0.1)],
        )
        .unwrap();
        let set = trace_branches(&spec, &default_k_grid(&spec, 150)).unwrap();
        assert_eq!(set.branches.len(), 6);
        let ends: Vec<Anchor> = set.branches.iter().map(|b| b.end).collect();
        assert_eq!(ends[4], Anchor::Infinity);
        assert_eq!(ends[5], Anchor::Infinity);
        let res: Vec<f64> = ends[..4].iter().map(|a| a.value().unwrap().re).collect();
        assert!(res.windows(2).all(|w| w[0] <= w[1]));
        for b in &set.branches {
            assert!(b.values[1..].iter().all(|w| w.im < 0.0));
        }
    }

    #[test]
    fn rejects_bad_grid() {
        let spec = MaterialSpec::vacuum();
        assert!(trace_branches(&spec, &[0.1, 1.0]).is_err());
        assert!(trace_branches(&spec, &[0.0, 1.0, 1.0]).is_err());
    }
}
