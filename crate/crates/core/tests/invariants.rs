use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use repeater_core::fock::{simulate_segment, ErrorModelParams, DEFAULT_FOCK_CUTOFF};
use repeater_core::linalg::{ComplexMatrix, DensityMatrix};
use repeater_core::metrics::{chsh_value, negativity, TSIRELSON};
use repeater_core::register::{build_register_density, default_cutoff, loss_amp, register_density, RegisterScenario, TmsvParams};
use repeater_core::single_qubit::OneQubitDesign;
use repeater_core::swap::{chain_distribution, run_chain};

fn ginibre_state(entries: &[f64]) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(4, 4, |r, c| Complex64::new(entries[2 * (4 * r + c)], entries[2 * (4 * r + c) + 1]));
    let m = g.matmul(&g.dagger()).unwrap();
    let tr = m.trace().re;
    let m = m.scale_real(1.0 / tr);
    // remove rounding asymmetry
    let sym = m.add(&m.dagger()).unwrap().scale_real(0.5);
    DensityMatrix::new(sym, vec![2, 2], true).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng) -> DensityMatrix {
    let entries: Vec<f64> = (0..32).map(|_| StandardNormal.sample(rng)).collect();
    ginibre_state(&entries)
}

#[test]
fn tsirelson_bound_over_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut largest: f64 = 0.0;
    for _ in 0..1000 {
        let s = chsh_value(&random_state(&mut rng)).unwrap();
        assert!(s.abs() <= TSIRELSON + 1e-12);
        largest = largest.max(s.abs());
    }
    assert!(largest > 1.0);
}

#[test]
fn register_states_pass_invariants() {
    for qubits in 1..=3 {
        for &(tl, tr) in &[(0.3, 0.9), (std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_4), (1.2, 0.2)] {
            for &eta in &[1.0, 0.6, 0.1] {
                let sc = RegisterScenario::new(qubits, tl, tr, TmsvParams::new(0.5, 0.4).unwrap(), 1.0, eta).unwrap();
                let rho = register_density(&sc).unwrap();
                rho.check_invariants().unwrap();
                assert!(rho.matrix().hermiticity_deviation() <= 1e-12);
                let norm = rho.normalize().unwrap();
                let (a, b) = (negativity(&norm, 0).unwrap(), negativity(&norm, 1).unwrap());
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn extra_photon_cutoff_is_harmless() {
    let sc = RegisterScenario::new(2, 0.7, 0.5, TmsvParams::real(0.5).unwrap(), 0.8, 0.4).unwrap();
    let base = default_cutoff(&sc).unwrap();
    let a = build_register_density(&sc, base).unwrap();
    let b = build_register_density(&sc, base + 2).unwrap();
    assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
}

#[test]
fn chain_states_pass_invariants() {
    let design = OneQubitDesign::for_target(0.01, 0.6).unwrap();
    let seg = design.density(0.0).unwrap().normalize().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for m in 1..=6 {
        let chain = run_chain(&seg, m, &mut rng).unwrap();
        chain.rho.check_invariants().unwrap();
    }
    let dist = chain_distribution(&seg, 5).unwrap();
    let total: f64 = dist.iter().map(|(w, _)| w).sum();
    assert!((total - 1.0).abs() < 1e-12);
    for (_, rho) in &dist {
        rho.check_invariants().unwrap();
    }
}

#[test]
fn segment_simulation_with_errors_passes_invariants() {
    let sc = RegisterScenario::new(1, 0.5, 0.3, TmsvParams::real(0.3).unwrap(), 1.0, 0.3).unwrap();
    for err in [
        ErrorModelParams { p_dark: 1e-3, ..ErrorModelParams::ideal() },
        ErrorModelParams { eta_coupling: 0.9, eta_detector: 0.95, ..ErrorModelParams::ideal() },
        ErrorModelParams { eta_ch_l: 0.9, ..ErrorModelParams::ideal() },
    ] {
        let rho = simulate_segment(&sc, &err, DEFAULT_FOCK_CUTOFF).unwrap();
        rho.check_invariants().unwrap();
        assert!(rho.trace() > 0.0 && rho.trace() <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_states_are_valid_and_party_symmetric(entries in prop::collection::vec(-1.0f64..1.0, 32)) {
        prop_assume!(entries.iter().any(|v| v.abs() > 1e-3));
        let rho = ginibre_state(&entries);
        rho.check_invariants().unwrap();
        let a = negativity(&rho, 0).unwrap();
        let b = negativity(&rho, 1).unwrap();
        prop_assert!((a - b).abs() <= 1e-10);
        prop_assert!(a >= -1e-12 && a <= 0.5 + 1e-12);
        prop_assert!(chsh_value(&rho).unwrap().abs() <= TSIRELSON + 1e-12);
    }

    #[test]
    fn loss_amplitudes_are_normalized(n in 0usize..40, eta in 0.0f64..=1.0) {
        let total: f64 = (0..=n).map(|l| loss_amp(n, l, eta).unwrap().powi(2)).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn register_density_is_physical(
        qubits in 1usize..=2,
        theta_l in 0.05f64..1.5,
        theta_r in 0.05f64..1.5,
        mean_n in 0.01f64..1.0,
        phase in -3.0f64..3.0,
        eta_l in 0.05f64..=1.0,
        eta_r in 0.05f64..=1.0,
    ) {
        let sc = RegisterScenario::new(qubits, theta_l, theta_r, TmsvParams::new(mean_n, phase).unwrap(), eta_l, eta_r).unwrap();
        let rho = register_density(&sc).unwrap();
        rho.check_invariants().unwrap();
        prop_assert!(rho.matrix().hermiticity_deviation() <= 1e-12);
        let norm = rho.normalize().unwrap();
        prop_assert!((negativity(&norm, 0).unwrap() - negativity(&norm, 1).unwrap()).abs() <= 1e-10);
    }

    // Above θ_R = π/4 a lost TMSV photon lets the emitter photon herald on
    // its own, so the trace can fall with η_R there.
    #[test]
    fn heralding_probability_grows_with_transmission(
        theta_l in 0.05f64..1.5,
        theta_r in 0.05f64..std::f64::consts::FRAC_PI_4,
        mean_n in 0.01f64..1.0,
        eta in 0.05f64..0.95,
    ) {
        let trace = |eta_r: f64| {
            let sc = RegisterScenario::new(1, theta_l, theta_r, TmsvParams::real(mean_n).unwrap(), 1.0, eta_r).unwrap();
            register_density(&sc).unwrap().trace()
        };
        prop_assert!(trace(eta) <= trace((eta + 0.05).min(1.0)) + 1e-15);
    }
}
