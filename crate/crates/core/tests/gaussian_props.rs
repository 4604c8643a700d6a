use dpmqkd::channel::{build_covariance, covariance_from_arms, key_rate, ChannelParams};
use dpmqkd::gaussian_info::{
    holevo_bound, mutual_information, symplectic_eigenvalues, symplectic_spectrum_oracle,
    von_neumann_g, TwoModeCovariance,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// For `Γ = diag(a, a) ⊕ diag(b, b)` with correlations `(c, -c)` the
/// uncertainty relation reduces to `c² ≤ (max(a,b) + 1)(min(a,b) - 1)`.
fn physical_c_bound(a: f64, b: f64) -> f64 {
    ((a.max(b) + 1.0) * (a.min(b) - 1.0)).sqrt()
}

fn random_physical(rng: &mut impl Rng) -> TwoModeCovariance {
    let a = 1.0 + 10f64.powf(rng.random_range(-3.0..2.0));
    let b = if rng.random_bool(0.2) { a } else { 1.0 + 10f64.powf(rng.random_range(-3.0..2.0)) };
    let c = physical_c_bound(a, b) * rng.random_range(0.0..=1.0f64);
    TwoModeCovariance::new(a, b, c).unwrap()
}

#[test]
fn closed_form_spectrum_matches_matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let cov = random_physical(&mut rng);
        let pair = symplectic_eigenvalues(&cov).unwrap();
        let [l1, l2] = symplectic_spectrum_oracle(&cov.to_matrix()).unwrap();
        worst = worst.max((pair.lambda1 - l1).abs()).max((pair.lambda2 - l2).abs());
    }
    assert!(worst < 1e-9, "max deviation {worst}");
}

#[test]
fn boundary_states_have_unit_eigenvalue() {
    for (a, b) in [(2.0, 2.0), (5.0, 1.5), (1.2, 40.0)] {
        let cov = TwoModeCovariance::new(a, b, physical_c_bound(a, b)).unwrap();
        let pair = symplectic_eigenvalues(&cov).unwrap();
        assert!((pair.lambda2 - 1.0).abs() < 1e-9, "{a} {b} -> {}", pair.lambda2);
    }
}

#[test]
fn beyond_the_boundary_is_rejected() {
    let (a, b) = (5.0, 3.0);
    let cov = TwoModeCovariance::new(a, b, physical_c_bound(a, b) * 1.01).unwrap();
    assert!(symplectic_eigenvalues(&cov).is_err());
}

#[test]
fn epr_mutual_information_closed_form() {
    for v in [1.5, 5.0, 20.0, 100.0] {
        let cov = covariance_from_arms(1.0, 1.0, 0.0, v).unwrap();
        let expected = ((v + 1.0) / 2.0).log2();
        assert!((mutual_information(&cov).unwrap() - expected).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn eigenvalue_product_is_det_root(
        a in 1.0f64..80.0,
        b in 1.0f64..80.0,
        frac in 0.0f64..=1.0,
    ) {
        let cov = TwoModeCovariance::new(a, b, physical_c_bound(a, b) * frac).unwrap();
        let p = symplectic_eigenvalues(&cov).unwrap();
        prop_assert!(p.lambda1 >= p.lambda2);
        prop_assert!((p.lambda1 * p.lambda2 - cov.det_root()).abs() <= 1e-12 * cov.det_root());
        prop_assert!(
            (p.lambda1.powi(2) + p.lambda2.powi(2) - cov.seralian()).abs()
                <= 1e-10 * cov.seralian()
        );
    }

    #[test]
    fn entropy_function_is_increasing(x in 0.0f64..1e4, dx in 1e-6f64..10.0) {
        prop_assert!(von_neumann_g(x + dx).unwrap() > von_neumann_g(x).unwrap());
    }

    #[test]
    fn holevo_is_non_negative(
        t1 in 0.01f64..=1.0,
        t2 in 0.01f64..=1.0,
        eps in 0.0f64..0.2,
        v in 1.01f64..60.0,
    ) {
        let cov = covariance_from_arms(t1, t2, eps, v).unwrap();
        prop_assert!(holevo_bound(&cov).unwrap() >= -1e-12);
    }

    #[test]
    fn channel_covariance_is_physical(
        d in 0.0f64..100.0,
        eps in 0.0f64..0.5,
        v in 1.01f64..60.0,
    ) {
        let p = ChannelParams {
            total_distance_km: d,
            excess_noise: eps,
            modulation_variance: v,
            ..ChannelParams::default()
        };
        let cov = build_covariance(&p).unwrap();
        let [_, l2] = symplectic_spectrum_oracle(&cov.to_matrix()).unwrap();
        prop_assert!(l2 >= 1.0 - 1e-9);
    }

    #[test]
    fn key_rate_falls_with_noise(d in 0.0f64..20.0, eps in 0.0f64..0.05, deps in 1e-4f64..0.05) {
        let p = ChannelParams::default().with_distance(d);
        let k0 = key_rate(&p.with_excess_noise(eps)).unwrap();
        let k1 = key_rate(&p.with_excess_noise(eps + deps)).unwrap();
        prop_assert!(k1 < k0);
    }

    #[test]
    fn key_rate_falls_with_distance(d in 0.0f64..40.0, dd in 0.01f64..5.0) {
        let p = ChannelParams::default();
        let k0 = key_rate(&p.with_distance(d)).unwrap();
        let k1 = key_rate(&p.with_distance(d + dd)).unwrap();
        prop_assert!(k1 < k0);
    }
}
