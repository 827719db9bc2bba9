mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use vcm_core::linalg::CMat;
use vcm_core::mi::*;
use vcm_core::Error;

fn mi(g: CMat, noise_var: f64, order: usize, nodes: usize) -> f64 {
    let ch = EffectiveChannel::new(g, noise_var).unwrap();
    let grid = QuadratureGrid::new(nodes, ch.n_r()).unwrap();
    mutual_information_gh(&ch, &Constellation::qam(order).unwrap(), &grid).unwrap()
}

#[test]
fn hermite_rule_integrates_polynomials_exactly() {
    // int t^{2k} e^{-t^2} dt = Gamma(k + 1/2)
    let (x, w) = gauss_hermite(6);
    let moment = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
    let sqrt_pi = std::f64::consts::PI.sqrt();
    assert!((moment(0) - sqrt_pi).abs() < 1e-12);
    assert!((moment(2) - sqrt_pi / 2.0).abs() < 1e-12);
    assert!((moment(4) - 0.75 * sqrt_pi).abs() < 1e-12);
    assert!((moment(10) - 945.0 / 32.0 * sqrt_pi).abs() < 1e-9);
    assert!(moment(3).abs() < 1e-12);
    let grid = QuadratureGrid::new(4, 2).unwrap();
    assert!((grid.raw_weight_sum() - std::f64::consts::PI.powi(2)).abs() < 1e-10);
    assert!((grid.axis_weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
    assert_eq!(grid.len(), 256);
}

#[test]
fn qam_alphabets_have_unit_energy_and_zero_mean() {
    for m in [4, 16, 64] {
        let c = Constellation::qam(m).unwrap();
        let pts = c.points();
        assert_eq!(pts.len(), m);
        let e = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / m as f64;
        let mean: Complex64 = pts.iter().sum();
        assert!((e - 1.0).abs() < 1e-12);
        assert!(mean.norm() < 1e-12);
        assert_eq!(c.bits_per_symbol(), (m as f64).log2());
    }
    assert!(Constellation::qam(32).is_err());
}

#[test]
fn scalar_bpsk_like_limits() {
    // one stream: 0 bits at vanishing SNR, log2 M at high SNR
    let g = CMat::from_element(1, 1, Complex64::new(1.0, 0.0));
    assert!(mi(g.clone(), 1e4, 4, 8) < 1e-3);
    assert!((mi(g, 1e-3, 16, 8) - 4.0).abs() < 1e-6);
}

#[test]
fn zero_columns_are_fictitious() {
    let mut g = common::gaussian(2, 3, 5);
    g.column_mut(2).fill(Complex64::new(0.0, 0.0));
    let reduced = g.columns(0, 2).into_owned();
    assert!((mi(g, 0.5, 4, 5) - mi(reduced, 0.5, 4, 5)).abs() < 1e-10);
}

#[test]
fn guard_limits_alphabet_size() {
    assert!(check_guard(16, 5, false).is_ok());
    match check_guard(16, 6, false) {
        Err(Error::Guard(msg)) => assert!(msg.contains("2^20")),
        other => panic!("expected guard violation, got {other:?}"),
    }
    assert!(check_guard(16, 6, true).is_ok());
    assert_eq!(gh_cost(4, 2, 2, 3), 16f64.powi(2) * 81.0);
}

#[test]
fn monte_carlo_is_seeded_and_close_to_quadrature() {
    let g = common::gaussian(2, 2, 8);
    let ch = EffectiveChannel::new(g.clone(), 0.5).unwrap();
    let cons = Constellation::qam(4).unwrap();
    let a = mutual_information_mc(&ch, &cons, 20_000, 1).unwrap();
    let b = mutual_information_mc(&ch, &cons, 20_000, 1).unwrap();
    assert_eq!(a.bits.to_bits(), b.bits.to_bits());
    let gh = mi(g, 0.5, 4, 10);
    assert!(
        (a.bits - gh).abs() < (4.0 * a.std_error).max(0.02),
        "mc {} gh {gh}",
        a.bits
    );
    assert!(mutual_information_mc(&ch, &cons, 9_999, 1).is_err());
}

#[test]
fn estimator_switches_to_monte_carlo_over_budget() {
    let ch = EffectiveChannel::new(common::gaussian(3, 3, 2), 1.0).unwrap();
    let cons = Constellation::qam(16).unwrap();
    let est = MiEstimator {
        per_axis: 3,
        gh_budget: 1e6,
        mc_samples: 10_000,
        seed: 4,
    };
    let e = est.estimate(&ch, &cons).unwrap();
    assert!(matches!(e.method, EstimateMethod::Mc));
    assert!(e.std_error > 0.0);
    let small = EffectiveChannel::new(common::gaussian(1, 1, 2), 1.0).unwrap();
    assert!(matches!(
        est.estimate(&small, &cons).unwrap().method,
        EstimateMethod::Gh
    ));
}

#[test]
fn mmse_of_a_silent_channel_is_the_prior_covariance() {
    let ch = EffectiveChannel::new(CMat::zeros(1, 1), 1.0).unwrap();
    let grid = QuadratureGrid::new(4, 1).unwrap();
    let e = mmse_matrix(&ch, &Constellation::qam(4).unwrap(), &grid).unwrap();
    assert!((e[(0, 0)].re - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mutual_information_is_bounded(seed in any::<u64>(), snr in -10.0f64..25.0) {
        let g = common::gaussian(2, 2, seed);
        let bits = mi(g, 10f64.powf(-snr / 10.0), 4, 3);
        prop_assert!(bits >= -1e-9 && bits <= 4.0 + 1e-9, "{}", bits);
    }

    #[test]
    fn left_unitary_invariance(seed in any::<u64>(), snr in -5.0f64..15.0) {
        let g = common::gaussian(2, 2, seed);
        let u = common::unitary(2, seed ^ 0xabc);
        let nv = 10f64.powf(-snr / 10.0);
        let a = mi(g.clone(), nv, 4, 4);
        let b = mi(&u * g, nv, 4, 4);
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn more_power_never_hurts(seed in any::<u64>(), snr in -5.0f64..10.0) {
        let g = common::gaussian(2, 2, seed);
        let nv = 10f64.powf(-snr / 10.0);
        let lo = mi(g.clone(), nv, 4, 6);
        let hi = mi(g, nv / 2.0, 4, 6);
        prop_assert!(hi >= lo - 1e-6);
    }

    #[test]
    fn gradient_matches_mmse_relation(seed in any::<u64>()) {
        let h = common::gaussian(2, 2, seed);
        let p = common::gaussian(2, 2, seed ^ 1);
        let ch = EffectiveChannel::new(h.clone(), 1.0).unwrap();
        let grid = QuadratureGrid::new(4, 2).unwrap();
        let cons = Constellation::qam(4).unwrap();
        let g = mi_gradient(&ch, &p, &cons, &grid).unwrap();
        let e = mmse_matrix(&EffectiveChannel::new(&h * &p, 1.0).unwrap(), &cons, &grid).unwrap();
        let direct = gradient_from_mmse(&ch, &p, &e);
        prop_assert!((&g - &direct).norm() < 1e-10 * (1.0 + g.norm()));
    }
}
