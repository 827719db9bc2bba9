mod common;

use proptest::prelude::*;
use vcm_core::channel::*;
use vcm_core::linalg::{max_abs_diff, CMat};
use vcm_core::vcm::*;

#[test]
fn dft_bases_are_unitary() {
    for basis in [DftBasis::ula(16), DftBasis::kronecker(4, 5)] {
        let n = basis.order();
        let gram = basis.matrix.adjoint() * &basis.matrix;
        assert!(max_abs_diff(&gram, &CMat::identity(n, n)) < 1e-12);
    }
}

#[test]
fn broadside_steering_lands_on_bin_zero() {
    let a = steering_ula(std::f64::consts::FRAC_PI_2, 32, 0.5);
    let h = CMat::from_column_slice(32, 1, a.as_slice());
    let p = row_power(&project_vcm(&h, &DftBasis::ula(32)).unwrap());
    let peak = (0..32).max_by(|&i, &j| p[i].total_cmp(&p[j])).unwrap();
    assert_eq!(peak, 0);
    assert!((p[0] - 32.0).abs() < 1e-9);
}

#[test]
fn captured_power_matches_power_fraction() {
    let geom = ArrayGeometry::ula(100, 0.5);
    let g = GroupScenario::ula(1, 61.0, 4.0, 5, vec![4]);
    let h = synth_group_channel(&g, &geom, 3).unwrap();
    let ht = project_vcm(&h.matrix, &DftBasis::ula(100)).unwrap();
    let s = detect_support(&ht, 1.0, 1).unwrap();
    assert!(!s.is_empty());
    assert!((s.captured - power_fraction(&ht, &s.indices)).abs() < 1e-12);
    let all: Vec<usize> = (0..100).collect();
    assert!((power_fraction(&ht, &all) - 1.0).abs() < 1e-12);
    let vc = effective_virtual_channel(&h.matrix, &DftBasis::ula(100), &s.indices, 1).unwrap();
    assert_eq!(vc.matrix.nrows(), s.len());
    assert!((vc.support.captured - s.captured).abs() < 1e-9);
}

#[test]
fn support_is_one_based_on_output() {
    let s = SupportSet {
        group: 1,
        indices: vec![0, 4, 99],
        captured: 0.5,
    };
    assert_eq!(s.one_based(), vec![1, 5, 100]);
}

#[test]
fn zero_threshold_rejected() {
    assert!(detect_support(&CMat::zeros(4, 1), 0.0, 1).is_err());
}

#[test]
fn jaccard_of_known_sets() {
    assert_eq!(jaccard(&[1, 2, 3], &[2, 3, 4]), 0.5);
    assert_eq!(jaccard(&[], &[]), 1.0);
    assert_eq!(jaccard(&[1], &[2]), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_preserves_energy(h in common::complex_matrix(12, 3)) {
        let ht = project_vcm(&h, &DftBasis::ula(12)).unwrap();
        prop_assert!((ht.norm_squared() - h.norm_squared()).abs() <= 1e-9 * (1.0 + h.norm_squared()));
    }

    #[test]
    fn kronecker_projection_preserves_energy(h in common::complex_matrix(12, 2)) {
        let ht = project_vcm(&h, &DftBasis::kronecker(3, 4)).unwrap();
        prop_assert!((ht.norm_squared() - h.norm_squared()).abs() <= 1e-9 * (1.0 + h.norm_squared()));
    }

    #[test]
    fn predicted_support_respects_the_size_bound(theta in 10.0f64..170.0, spread in 0.5f64..6.0) {
        let (t, s) = (theta.to_radians(), spread.to_radians());
        let set = predicted_support_ula(t, s, 0.5, 100);
        prop_assert!(!set.is_empty());
        prop_assert!(set.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(set.len() as f64 <= support_bound(t, s, 0.5, 100).ceil());
    }

    #[test]
    fn closed_form_disjointness_is_sufficient(a in 8.0f64..172.0, b in 8.0f64..172.0) {
        let s = 4f64.to_radians();
        if lemma2_disjoint(a.to_radians(), b.to_radians(), s, 0.5, 100) {
            let sa = predicted_support_ula(a.to_radians(), s, 0.5, 100);
            let sb = predicted_support_ula(b.to_radians(), s, 0.5, 100);
            prop_assert!(sa.iter().all(|p| !sb.contains(p)), "{:?} vs {:?}", sa, sb);
        }
    }

    #[test]
    fn higher_threshold_shrinks_support(h in common::complex_matrix(16, 2), lo in 0.05f64..1.0, extra in 0.0f64..2.0) {
        let ht = project_vcm(&h, &DftBasis::ula(16)).unwrap();
        let small = detect_support(&ht, lo + extra, 0).unwrap();
        let big = detect_support(&ht, lo, 0).unwrap();
        prop_assert!(small.indices.iter().all(|p| big.indices.contains(p)));
        prop_assert!(small.captured <= big.captured + 1e-12);
    }
}
