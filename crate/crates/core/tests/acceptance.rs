//! Acceptance suite. One line per criterion; exits non-zero if any fails.

use std::time::Instant;

use dispersion_lab::decay::{energy_trace, fit_decay_exponent, predicted_exponent, InitialDataProfile};
use dispersion_lab::dispersion::{
    asymptotic_coefficients, band_structure, characterization_defects, default_k_grid, trace_branches,
    DispersionSolver, Orientation,
};
use dispersion_lab::herglotz::{atom_weight, default_eta_sequence, kernel_transform_check, measure_of, reconstruct};
use dispersion_lab::material::{
    herglotz_sample, log_polar_grid, validate_assumptions, Channel, MaterialSpec, Oscillator,
};
use dispersion_lab::modal::{build_modal, rk4_reference, spectral_decomposition, spectrum_consistency};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Least-squares line through (ln x, ln y): (slope, intercept, r²).
fn loglog(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx, sxy * sxy / (sxx * syy))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn spec(eps0: f64, mu0: f64, e: &[(f64, f64, f64)], m: &[(f64, f64, f64)]) -> MaterialSpec {
    let conv = |v: &[(f64, f64, f64)]| v.iter().map(|&(c, w, a)| Oscillator::new(c, w, a)).collect();
    MaterialSpec::new(eps0, mu0, conv(e), conv(m)).unwrap()
}

fn mixed_specs() -> Vec<MaterialSpec> {
    vec![
        spec(1.0, 1.0, &[(1.0, 2.0, 0.3), (0.5, 4.0, 0.0)], &[(0.7, 1.0, 0.1)]),
        spec(1.0, 1.0, &[(1.0, 1.0, 0.5)], &[(0.8, 2.0, 0.3)]),
        spec(2.0, 0.5, &[(1.2, 1.5, 0.0), (0.6, 3.0, 0.2)], &[(0.9, 2.5, 0.0), (0.4, 0.8, 0.05)]),
        spec(1.0, 1.0, &[(1.0, 0.0, 0.2)], &[(1.0, 2.0, 0.0)]),
        spec(1.0, 1.0, &[(1.0, 0.7, 0.1), (0.5, 1.3, 0.0), (0.3, 2.2, 0.4)], &[(0.6, 1.8, 0.05)]),
    ]
}

/// Random spec with distinct resonances; `damped` draws damping for every
/// oscillator.
fn random_spec(rng: &mut StdRng, damped: bool) -> Option<MaterialSpec> {
    let ne = rng.gen_range(0..=2);
    let nm = rng.gen_range(0..=2);
    if ne + nm == 0 {
        return None;
    }
    let mut draw = |n: usize| -> Vec<Oscillator> {
        (0..n)
            .map(|_| {
                let a = if damped { rng.gen_range(0.0..1.0) } else { 0.0 };
                Oscillator::new(rng.gen_range(0.2..2.0), rng.gen_range(0.3..3.0), a)
            })
            .collect()
    };
    let (e, m) = (draw(ne), draw(nm));
    MaterialSpec::new(rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), e, m).ok()
}

fn c1_drude_bands() -> Outcome {
    let s = MaterialSpec::drude(1.0, 2.0).map_err(err)?;
    let set = trace_branches(&s, &default_k_grid(&s, 400)).map_err(err)?;
    let bs = band_structure(&s, &set).map_err(err)?;
    let tol = 1e-9;
    let ok = bs.bands.len() == 2
        && bs.bands[0].lower.abs() < tol
        && bs.bands[0].upper.is_some_and(|u| (u - 1.0).abs() < tol)
        && bs.bands[0].orientation == Orientation::Backward
        && (bs.bands[1].lower - 2.0).abs() < tol
        && bs.bands[1].upper.is_none()
        && bs.bands[1].orientation == Orientation::Forward
        && bs.gaps.len() == 1
        && (bs.gaps[0].lower - 1.0).abs() < tol
        && (bs.gaps[0].upper - 2.0).abs() < tol
        && bs.negative_index;
    let desc: Vec<String> = bs
        .bands
        .iter()
        .map(|b| format!("[{:.12}, {}] {:?}", b.lower, b.upper.map_or("inf".into(), |u| format!("{u:.12}")), b.orientation))
        .collect();
    check(ok, format!("bands {} negative_index={}", desc.join(" "), bs.negative_index))
}

fn c2_spectrum() -> Outcome {
    let mut worst: f64 = 0.0;
    for s in mixed_specs() {
        for k in logspace(1e-2, 1e2, 20) {
            let m = spectrum_consistency(&s, k).map_err(err)?;
            worst = worst.max(m.max_scaled_distance);
        }
    }
    check(worst < 1e-8, format!("max |root - eig|/(1+|w|) = {worst:.3e} over 5 specs x 20 k"))
}

fn c3_band_properties() -> Outcome {
    let mut rng = StdRng::seed_from_u64(3);
    let mut violations = Vec::new();
    let mut done = 0;
    while done < 20 {
        let Some(s) = random_spec(&mut rng, false) else { continue };
        if !validate_assumptions(&s).is_ok_and(|r| r.all_assumptions_ok()) {
            continue;
        }
        done += 1;
        let set = trace_branches(&s, &default_k_grid(&s, 1000)).map_err(err)?;
        for b in &set.branches {
            if b.values.iter().any(|w| w.im.abs() >= 1e-8) {
                violations.push(format!("spec {done}: complex root on branch {}", b.index));
            }
        }
        for b in set.nonnegative() {
            let d: Vec<f64> = b.values[1..].windows(2).map(|w| w[1].re - w[0].re).collect();
            if !(d.iter().all(|&x| x > 0.0) || d.iter().all(|&x| x < 0.0)) {
                violations.push(format!("spec {done}: branch {} not strictly monotone", b.index));
            }
        }
        let bs = band_structure(&s, &set).map_err(err)?;
        for w in bs.bands.windows(2) {
            if w[0].upper.map_or(true, |u| u > w[1].lower + 1e-9) {
                violations.push(format!("spec {done}: bands {} and {} overlap", w[0].index, w[1].index));
            }
        }
        let first = &bs.bands[0];
        let last = &bs.bands[bs.bands.len() - 1];
        if first.orientation != Orientation::Forward || last.orientation != Orientation::Forward {
            violations.push(format!("spec {done}: first/last band not forward"));
        }
        let top = bs.bands.iter().map(|b| b.upper.unwrap_or(b.lower)).fold(s.omega_max(), f64::max);
        let defects = characterization_defects(&s, &bs, 10_000, 1.5 * top, 1e-6).map_err(err)?;
        if defects > 0 {
            violations.push(format!("spec {done}: {defects} sign-characterization defects"));
        }
    }
    check(violations.is_empty(), format!("20 specs, {} violations {}", violations.len(), violations.join("; ")))
}

fn c4_hf_coefficient() -> Outcome {
    let s = spec(1.0, 1.0, &[(1.0, 1.0, 0.5)], &[(2.0, 3.0, 0.25)]);
    let solver = DispersionSolver::new(&s).map_err(err)?;
    let a_inf = asymptotic_coefficients(&s).map_err(err)?.a_infinity;
    let c2 = s.light_speed().powi(2);
    let unbounded = |k: f64| -> Result<Vec<Complex64>, String> {
        let mut r = solver.roots_at_k(k).map_err(err)?;
        r.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        r.truncate(2);
        Ok(r)
    };
    let k0 = 1e3 * s.omega_max();
    let defect = unbounded(k0)?
        .iter()
        .map(|w| (w.im * 2.0 * c2 * k0 * k0 / a_inf + 1.0).abs())
        .fold(0.0, f64::max);
    let ks = logspace(1e2 * s.omega_max(), 1e3 * s.omega_max(), 20);
    let mut ys = Vec::new();
    for &k in &ks {
        let r = unbounded(k)?;
        ys.push(-r.iter().find(|w| w.re > 0.0).unwrap().im);
    }
    let (slope, _, r2) = loglog(&ks, &ys);
    check(
        defect < 0.02 && (slope + 2.0).abs() < 0.05,
        format!("coefficient defect {defect:.2e}, slope {slope:.4} (r2 {r2:.6})"),
    )
}

fn resonant_slope(solver: &DispersionSolver, anchor: f64, ks: &[f64]) -> Result<f64, String> {
    let mut ys = Vec::new();
    for &k in ks {
        let r = solver.roots_at_k(k).map_err(err)?;
        let w = r.iter().min_by(|a, b| (*a - anchor).norm().total_cmp(&(*b - anchor).norm())).unwrap();
        ys.push(-w.im);
    }
    Ok(loglog(ks, &ys).0)
}

fn c5_weak_exponent() -> Outcome {
    // ε non-dissipative with a simple resonance at 2; μ carries the loss and
    // an undamped resonance at 1 that anchors the slow branch.
    let s = spec(1.0, 1.0, &[(1.0, 2.0, 0.0)], &[(1.0, 1.0, 0.0), (1.0, 3.0, 0.4)]);
    let d = validate_assumptions(&s).map_err(err)?.dissipativity;
    let solver = DispersionSolver::new(&s).map_err(err)?;
    let ks = logspace(1e2 * s.omega_max(), 1e4 * s.omega_max(), 30);
    let slow = resonant_slope(&solver, 1.0, &ks)?;
    let other = resonant_slope(&solver, 2.0, &ks)?;
    check(
        d.e_n_d && !d.resonances_e.simple.is_empty() && (slow + 4.0).abs() < 0.05,
        format!("e.n.d={} slope at 1: {slow:.4}; slope at 2: {other:.4}", d.e_n_d),
    )
}

fn c6_lf_asymptotics() -> Outcome {
    let s = spec(1.0, 1.0, &[(1.0, 2.0, 1.0)], &[]);
    let solver = DispersionSolver::new(&s).map_err(err)?;
    let ks = logspace(1e-3 * s.omega_min(), 1e-2 * s.omega_min(), 20);
    let mut ys = Vec::new();
    for &k in &ks {
        let r = solver.roots_at_k(k).map_err(err)?;
        let w = r.iter().filter(|w| w.re > 0.0).min_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
        ys.push(-w.im);
    }
    let (slope, intercept, _) = loglog(&ks, &ys);
    let c2 = s.light_speed().powi(2);
    let fitted = intercept.exp() / c2;
    let bullet = asymptotic_coefficients(&s).map_err(err)?.find(0.0, true).and_then(|e| e.coefficient).unwrap();
    // exact leading order: Im ω = −k²/(2ε(0)μ(0))·(ε₀S_e/ε(0) + μ₀S_m/μ(0)), S = ΣαΩ²/ω₀⁴
    let zero = Complex64::new(0.0, 0.0);
    let (e0, m0) = (s.epsilon(zero).unwrap().re, s.mu(zero).unwrap().re);
    let sum = |o: &[Oscillator]| o.iter().map(|o| o.damping * o.coupling.powi(2) / o.resonance.powi(4)).sum::<f64>();
    let exact = (s.eps0() * sum(s.electric()) / e0 + s.mu0() * sum(s.magnetic()) / m0) / (2.0 * e0 * m0 * c2);
    check(
        (slope - 2.0).abs() < 0.05,
        format!(
            "slope {slope:.4}; coefficient {fitted:.5}, ratio to closed form {:.4}, ratio to exact leading order {:.6}",
            fitted / bullet,
            fitted / exact
        ),
    )
}

fn rich_state(dim: usize, e: f64) -> DVector<Complex64> {
    DVector::from_fn(dim, |i, _| Complex64::new(e / (i as f64 + 1.0), 0.3 * (i as f64).sin()))
}

fn c7_conservation() -> Outcome {
    let s = spec(1.0, 1.0, &[(1.0, 2.0, 0.0), (0.5, 4.0, 0.0)], &[(0.7, 1.0, 0.0)]);
    let sys = build_modal(&s, 1.0, 1).map_err(err)?;
    let u0 = rich_state(sys.dim(), 1.0);
    let e0 = sys.energy(&u0);
    let t = 100.0 / s.omega_max();
    let rk = rk4_reference(&sys, &u0, t, 0.01 / sys.spectral_norm()).map_err(err)?;
    let rk_drift = rk.ledger.iter().map(|r| (r.energy - e0).abs() / e0).fold(0.0, f64::max);
    let d = spectral_decomposition(&sys).map_err(err)?;
    let exact_drift = logspace(1e-3 * t, t, 50)
        .into_iter()
        .map(|ti| (sys.energy(&d.evolve(&u0, ti)) - e0).abs() / e0)
        .fold(0.0, f64::max);
    check(
        rk_drift < 1e-8 && exact_drift < 1e-12,
        format!("RK4 drift {rk_drift:.2e} ({} steps), exact drift {exact_drift:.2e}", rk.steps),
    )
}

fn c8_dissipation_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for s in mixed_specs() {
        let sys = build_modal(&s, 1.0, 1).map_err(err)?;
        let u0 = rich_state(sys.dim(), 1.0);
        let w = s.omega_max();
        let rk = rk4_reference(&sys, &u0, 100.0 / w, 1e-3 / w).map_err(err)?;
        let e_max = rk.ledger.iter().map(|r| r.energy).fold(0.0, f64::max);
        worst = worst.max(rk.max_balance_defect / (e_max * w));
    }
    check(worst < 1e-6, format!("max |de/dt + d| / (max e * w_max) = {worst:.2e} over 5 specs"))
}

fn c9_decay() -> Outcome {
    let strong = spec(1.0, 1.0, &[(1.0, 1.0, 0.5)], &[(0.8, 2.0, 0.3)]);
    let weak = spec(1.0, 1.0, &[(1.0, 1.0, 0.0), (0.8, 2.0, 0.3)], &[]);
    let runs = [
        ("strong s=4 p=0", &strong, 4.0, 0.0, 1.5, 0.15),
        ("strong s=1 p=3", &strong, 1.0, 3.0, 1.0, 0.1),
        ("weak s=2 p=3", &weak, 2.0, 3.0, 1.0, 0.1),
        ("weak s=4 p=0", &weak, 4.0, 0.0, 1.5, 0.15),
    ];
    let grid = logspace(1.0, 1e8, 33);
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, s, sv, p, want, tol) in runs {
        let start = Instant::now();
        let profile = InitialDataProfile::new(p, sv);
        let predicted = predicted_exponent(s, &profile);
        let fitted = energy_trace(s, &profile, &grid).and_then(|tr| fit_decay_exponent(&tr, tr.last_decade()));
        let secs = start.elapsed().as_secs_f64();
        match fitted {
            Ok(f) => {
                let pass = (f.exponent - want).abs() <= tol && (predicted - want).abs() < 1e-12 && secs < 300.0;
                ok &= pass;
                parts.push(format!(
                    "{name}: {:.3} vs {want} (predicted {predicted}, r2 {:.4}, {secs:.0}s){}",
                    f.exponent,
                    f.r_squared,
                    if pass { "" } else { " FAIL" }
                ));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name}: {e} FAIL"));
            }
        }
    }
    check(ok, parts.join("; "))
}

fn c10_herglotz() -> Outcome {
    let mut rng = StdRng::seed_from_u64(10);
    let mut specs = Vec::new();
    while specs.len() < 20 {
        let damped = rng.gen_bool(0.5);
        if let Some(s) = random_spec(&mut rng, damped) {
            specs.push(s);
        }
    }
    let mut recon: f64 = 0.0;
    let mut min_im = f64::INFINITY;
    for s in &specs {
        let nu = measure_of(s, Channel::Electric);
        for _ in 0..50 {
            let w = Complex64::from_polar(rng.gen_range(0.1..10.0), rng.gen_range(0.05..3.09));
            let want = s.epsilon(w).map_err(err)?;
            let got = reconstruct(&nu, w).map_err(err)?;
            recon = recon.max((got - want).norm() / want.norm());
        }
        let scale = s.omega_max().max(1.0);
        let r = herglotz_sample(s, &log_polar_grid(100, 100, 1e-3 * scale, 1e3 * scale)).map_err(err)?;
        min_im = min_im.min(r.min_im_omega_eps).min(r.min_im_omega_mu);
    }
    let atom_spec = spec(1.5, 1.0, &[(1.2, 2.0, 0.0), (0.7, 3.5, 0.3)], &[]);
    let f = |w: Complex64| w * atom_spec.epsilon(w).unwrap() / atom_spec.eps0();
    let atom = atom_weight(f, 2.0, &default_eta_sequence(1e-2)).map_err(err)?.value;
    let atom_defect = (atom / (0.5 * 1.2 * 1.2) - 1.0).abs();
    check(
        recon < 1e-6 && atom_defect < 0.01 && min_im > 0.0,
        format!("reconstruction {recon:.2e}, atom defect {atom_defect:.2e}, min Im(w eps), Im(w mu) {min_im:.3e}"),
    )
}

fn c11_kernel() -> Outcome {
    let oscs = [
        Oscillator::undamped(1.0, 2.0),
        Oscillator::new(1.0, 2.0, 0.5),
        Oscillator::new(1.5, 1.0, 2.0),
        Oscillator::new(0.8, 1.0, 3.0),
        Oscillator::new(1.0, 0.0, 0.7),
    ];
    let mut worst: f64 = 0.0;
    for o in &oscs {
        for j in 0..10 {
            let x = -5.0 + j as f64 * 10.0 / 9.0;
            let w = Complex64::new(x, o.damping / 2.0 + 1.0 + 0.1 * j as f64);
            worst = worst.max(kernel_transform_check(o, w).map_err(err)?.defect);
        }
    }
    check(worst < 1e-6, format!("max kernel defect {worst:.2e} over 5 oscillators x 10 frequencies"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("drude bands", c1_drude_bands),
        ("roots vs modal eigenvalues", c2_spectrum),
        ("non-dissipative bands", c3_band_properties),
        ("high-frequency coefficient", c4_hf_coefficient),
        ("weak-dissipation exponent", c5_weak_exponent),
        ("low-frequency asymptotics", c6_lf_asymptotics),
        ("energy conservation", c7_conservation),
        ("dissipation identity", c8_dissipation_identity),
        ("decay exponents", c9_decay),
        ("herglotz round trip", c10_herglotz),
        ("kernel transform", c11_kernel),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|n| n != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {:>2} PASS {name} ({secs:.1}s): {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} ({secs:.1}s): {d}", i + 1);
            }
        }
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
