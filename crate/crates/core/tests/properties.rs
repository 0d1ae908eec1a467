use dispersion_lab::dispersion::DispersionSolver;
use dispersion_lab::material::{herglotz_sample, validate_assumptions, MaterialSpec, Oscillator};
use dispersion_lab::modal::{build_modal, eigenvalues, spectral_decomposition};
use dispersion_lab::spec_file::{parse_spec, spec_to_json};
use num_complex::Complex64;
use proptest::prelude::*;

fn oscillator(max_damping: f64) -> impl Strategy<Value = Oscillator> {
    (0.2..2.0f64, 0.3..3.0f64, 0.0..max_damping).prop_map(|(c, w, a)| Oscillator::new(c, w, a))
}

/// Specs satisfying the structural assumptions, optionally lossless.
fn valid_spec(max_damping: f64) -> impl Strategy<Value = MaterialSpec> {
    (
        0.5..2.0f64,
        0.5..2.0f64,
        prop::collection::vec(oscillator(max_damping), 0..3),
        prop::collection::vec(oscillator(max_damping), 0..3),
    )
        .prop_filter_map("assumptions", |(e0, m0, e, m)| {
            let s = MaterialSpec::new(e0, m0, e, m).ok()?;
            validate_assumptions(&s).ok().filter(|r| r.all_assumptions_ok()).map(|_| s)
        })
}

fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn roots_are_symmetric_and_accurate(spec in valid_spec(1.0), k in 0.01..100.0f64) {
        let solver = DispersionSolver::new(&spec).unwrap();
        let roots = solver.roots_at_k(k).unwrap();
        prop_assert_eq!(roots.len(), solver.degree());
        let scale = roots.iter().map(|r| r.norm()).fold(1.0, f64::max);
        for r in &roots {
            prop_assert!(r.im <= 1e-10 * scale, "root above the axis: {}", r);
            prop_assert!(solver.residual(*r, k) < 1e-9);
            let mirror = -r.conj();
            let d = roots.iter().map(|q| (q - mirror).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(d < 1e-8 * (1.0 + r.norm()), "no partner for {}", r);
        }
    }

    #[test]
    fn lossless_roots_are_real(spec in valid_spec(1e-300), k in 0.01..100.0f64) {
        let roots = DispersionSolver::new(&spec).unwrap().roots_at_k(k).unwrap();
        for r in roots {
            prop_assert!(r.im.abs() < 1e-8 * (1.0 + r.norm()));
        }
    }

    #[test]
    fn polarizations_share_the_spectrum(spec in valid_spec(1.0), k in 0.01..50.0f64) {
        let plus = sorted(eigenvalues(&build_modal(&spec, k, 1).unwrap().matrix).unwrap());
        let minus = sorted(eigenvalues(&build_modal(&spec, k, -1).unwrap().matrix).unwrap());
        for (a, b) in plus.iter().zip(&minus) {
            prop_assert!((a - b).norm() < 1e-9 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn projectors_resolve_identity(spec in valid_spec(1.0), k in 0.01..50.0f64) {
        let sys = build_modal(&spec, k, 1).unwrap();
        let d = spectral_decomposition(&sys).unwrap();
        prop_assert!(d.completeness_defect() < 1e-8);
        prop_assert!(d.idempotency_defect() < 1e-8);
    }

    #[test]
    fn energy_never_grows(spec in valid_spec(1.0), k in 0.01..20.0f64, t in 0.0..50.0f64) {
        let sys = build_modal(&spec, k, 1).unwrap();
        let d = spectral_decomposition(&sys).unwrap();
        let u0 = sys.field_state(Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
        let e0 = sys.energy(&u0);
        prop_assert!(sys.energy(&d.evolve(&u0, t)) <= e0 * (1.0 + 1e-9));
    }

    #[test]
    fn herglotz_positive(spec in valid_spec(1.0)) {
        let grid: Vec<Complex64> = (0..40)
            .map(|i| Complex64::from_polar(0.05 * 1.2f64.powi(i), 0.02 + 3.1 * (i as f64 * 0.37).fract()))
            .collect();
        let r = herglotz_sample(&spec, &grid).unwrap();
        prop_assert!(r.min_im_omega_eps > 0.0 && r.min_im_omega_mu > 0.0);
        prop_assert!(r.max_symmetry_defect < 1e-12);
    }

    #[test]
    fn spec_json_round_trip(spec in valid_spec(1.0)) {
        let back = parse_spec(&spec_to_json(&spec).to_string()).unwrap();
        prop_assert_eq!(back.spec, spec);
    }
}
