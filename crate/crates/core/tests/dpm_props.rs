use std::f64::consts::{FRAC_PI_4, PI};

use dpmqkd::dpm_optics::{
    dpm_output, dpm_simplified_output, faraday_mirror, gaussian_modulation_via_dpm,
    imprinted_amplitude_phase, roundtrip_rotated_element, synthesize_phases, wrap_phase, Arm,
    JonesMatrix, JonesVector, ModulationStats,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_input(rng: &mut impl Rng) -> JonesVector {
    let mut c = || Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    JonesVector::new(c(), c())
}

#[test]
fn mirror_cancels_birefringence() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let delta = rng.random_range(-PI..PI);
        let phi_o = rng.random_range(-10.0..10.0);
        let phi_e = rng.random_range(-10.0..10.0);
        let r = roundtrip_rotated_element(delta, phi_o, phi_e, FRAC_PI_4);
        let expected = faraday_mirror(FRAC_PI_4).scale(Complex64::cis(phi_o + phi_e));
        worst = worst.max(r.max_abs_diff(&expected));
    }
    assert!(worst < 1e-13, "max deviation {worst}");
}

#[test]
fn interferometer_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let input = random_input(&mut rng);
        let r = roundtrip_rotated_element(
            rng.random_range(-PI..PI),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            FRAC_PI_4,
        );
        let varsigma = rng.random_range(0.05..=1.0);
        let phi1 = rng.random_range(-2.0 * PI..2.0 * PI);
        let phi2 = rng.random_range(-2.0 * PI..2.0 * PI);
        let full = dpm_output(
            &input,
            Arm { varsigma, phi: phi1 },
            Arm { varsigma, phi: phi2 },
            &r,
        )
        .unwrap();
        let closed = dpm_simplified_output(&input, varsigma, phi1, phi2, &r).unwrap();
        worst = worst.max(full.max_abs_diff(&closed));
    }
    assert!(worst < 1e-13, "max deviation {worst}");
}

#[test]
fn unequal_losses_break_the_closed_form() {
    let input = JonesVector::horizontal(1.0);
    let r = JonesMatrix::IDENTITY;
    let full = dpm_output(&input, Arm { varsigma: 0.9, phi: 0.3 }, Arm { varsigma: 0.5, phi: 1.4 }, &r)
        .unwrap();
    let closed = dpm_simplified_output(&input, 0.9, 0.3, 1.4, &r).unwrap();
    assert!(full.max_abs_diff(&closed) > 1e-3);
}

#[test]
fn gaussian_modulation_variance() {
    let v_mod = 19.0;
    let m = gaussian_modulation_via_dpm(v_mod, 1_000_000, 5).unwrap();
    let s = ModulationStats::from_samples(&m.samples);
    assert_eq!(s.count, 1_000_000);
    assert!((s.var_x / v_mod - 1.0).abs() < 0.02, "var_x {}", s.var_x);
    assert!((s.var_p / v_mod - 1.0).abs() < 0.02, "var_p {}", s.var_p);
    assert!(s.mean_x.abs() < 0.05 && s.mean_p.abs() < 0.05);
    assert!(s.cov_xp.abs() < 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn synthesis_round_trip(
        frac in 0.0f64..=1.0,
        phase in -PI..PI,
        varsigma in 0.05f64..=1.0,
        input in 0.1f64..100.0,
    ) {
        let target = frac * varsigma * input;
        let (phi1, phi2) = synthesize_phases(target, phase, varsigma, input).unwrap();
        let (amp, got_phase) = imprinted_amplitude_phase(varsigma, phi1, phi2, input);
        prop_assert!((amp - target).abs() < 1e-12 * input.max(1.0));
        if target > 1e-9 {
            prop_assert!(wrap_phase(got_phase - phase).abs() < 1e-12);
        }
    }

    #[test]
    fn unreachable_targets_are_rejected(excess in 1e-6f64..10.0, varsigma in 0.05f64..=1.0) {
        let reach = varsigma * 3.0;
        prop_assert!(synthesize_phases(reach * (1.0 + excess), 0.0, varsigma, 3.0).is_err());
    }
}
