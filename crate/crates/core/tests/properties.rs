use proptest::prelude::*;
use qbridge::effective::{
    analyze, coupling_strength_from_eta, resonator_block, transformed_hamiltonian,
};
use qbridge::model::{build_hamiltonian, SystemParams};
use qbridge::observables::{hybrid_eigenstates, w_decomposition, weighted_rate, RelaxationRates};
use qbridge::oracle::eigenvalues;
use qbridge::solver::{minimize_residual, solve_conditions, Branch, SolverConfig};
use qbridge::transform::rotation_angle;

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spectrum_splits_into_two_blocks(n in 1usize..=5, g in 0.0f64..0.5, f in 0.0f64..0.5) {
        let a = analyze(&SystemParams::new(n, g, f), &cfg()).unwrap();
        prop_assert!(a.solution.residual < 1e-9);
        let exact = eigenvalues(&build_hamiltonian(&a.params).unwrap()).unwrap();
        let ht = transformed_hamiltonian(&a.params, &a.angles).unwrap();
        let mut parts = eigenvalues(&resonator_block(&ht)).unwrap();
        parts.extend(eigenvalues(&a.model.h_star()).unwrap());
        parts.sort_by(f64::total_cmp);
        for (x, y) in exact.iter().zip(&parts) {
            prop_assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn other_frequencies_and_negative_detuning(
        n in 1usize..=4,
        g in 0.0f64..0.4,
        f in 0.01f64..0.4,
        wr in 3.0f64..7.0,
        detuning in prop::sample::select(vec![-1.3, -0.7, 0.6, 1.5]),
    ) {
        let p = SystemParams::new(n, g, f).with_frequencies(wr, wr + detuning, wr + detuning);
        let a = analyze(&p, &cfg()).unwrap();
        prop_assert!(a.solution.residual < 1e-9 * detuning.abs());
        prop_assert!(a.angles.theta * detuning > 0.0);
    }

    #[test]
    fn explicit_and_eta_forms_agree(n in 1usize..=5, g in 0.0f64..0.5, f in 0.0f64..0.5) {
        let m = analyze(&SystemParams::new(n, g, f), &cfg()).unwrap().model;
        let via_eta = coupling_strength_from_eta(m.j_q, m.j_a, m.eps, m.eta, n);
        prop_assert!((via_eta - m.j_n).abs() < 1e-12);
    }

    #[test]
    fn fidelity_is_bounded_and_state_normalized(n in 1usize..=5, g in 0.0f64..0.5, f in 0.0f64..0.5) {
        let a = analyze(&SystemParams::new(n, g, f), &cfg()).unwrap();
        let w = w_decomposition(&a.angles).unwrap();
        prop_assert!((0.0..=1.0 + 1e-15).contains(&w.fidelity));
        prop_assert!((w.norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rates_stay_between_extremes(
        raw in prop::collection::vec(-1.0f64..1.0, 5),
        gamma in 0.1f64..2.0,
        gamma_prime in 0.1f64..2.0,
        kappa in 0.1f64..20.0,
    ) {
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let c: Vec<f64> = raw.iter().map(|x| x / norm).collect();
        let rates = RelaxationRates { gamma, gamma_prime, kappa };
        let r = weighted_rate(&c, &rates).unwrap();
        prop_assert!(r >= rates.min() - 1e-12 && r <= rates.max() + 1e-12);
    }

    #[test]
    fn ground_state_is_an_eigenvector(g in 0.01f64..0.5, f in 0.01f64..0.5) {
        let a = analyze(&SystemParams::new(2, g, f), &cfg()).unwrap();
        let (ground, excited) = hybrid_eigenstates(&a.angles).unwrap();
        let h = build_hamiltonian(&a.params).unwrap();
        for (v, e) in [(&ground, a.model.eps_nq + a.model.j_n), (&excited, a.model.eps_nq - a.model.j_n)] {
            let hv = h.mul_vec(v).unwrap();
            for k in 0..5 {
                prop_assert!((hv[k] - e * v[k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn fallback_agrees_with_newton(n in 1usize..=4, g in 0.05f64..0.5, f in 0.05f64..0.5) {
        let c = cfg();
        let s = solve_conditions(g, f, 1.0, n, &c).unwrap();
        let start = (s.angles.theta * (1.0 + 1e-4), s.angles.delta_prime * (1.0 - 1e-4));
        let m = minimize_residual(g, f, 1.0, n, start, &c).unwrap();
        prop_assert!((m.angles.theta - s.angles.theta).abs() < 1e-8);
        prop_assert!((m.angles.delta_prime - s.angles.delta_prime).abs() < 1e-8);
    }
}

#[test]
fn small_branch_continuation_is_continuous() {
    let c = SolverConfig {
        branch: Branch::SmallAngle,
        ..SolverConfig::default()
    };
    let mut prev: Option<f64> = None;
    for k in 1..=20 {
        let f = 0.1 * k as f64 / 20.0;
        let s = solve_conditions(0.2, f, 1.0, 2, &c).unwrap();
        let q = rotation_angle(s.angles.phi, s.angles.theta, 2);
        if let Some(p) = prev {
            assert!((q - p).abs() < 0.2);
        }
        prev = Some(q);
    }
}

#[test]
fn small_branch_ends_at_a_fold() {
    let c = SolverConfig {
        branch: Branch::SmallAngle,
        ..SolverConfig::default()
    };
    let near = solve_conditions(0.2, 0.1, 1.0, 2, &c).unwrap();
    assert!(rotation_angle(near.angles.phi, near.angles.theta, 2) < 1.0);
    let far = solve_conditions(0.3, 0.45, 1.0, 2, &c);
    if let Ok(s) = far {
        assert_eq!(s.method, qbridge::solver::SolveMethod::Fallback);
    }
}
