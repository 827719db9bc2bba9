mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use vcm_core::jsdm::*;
use vcm_core::linalg::{frobenius_sq, max_abs_diff, CMat};
use vcm_core::vcm::{DftBasis, SupportSet, VirtualChannel};

fn set(group: usize, indices: Vec<usize>) -> SupportSet {
    SupportSet {
        group,
        indices,
        captured: 1.0,
    }
}

#[test]
fn disjoint_blocks_have_identity_gram() {
    let basis = DftBasis::ula(16);
    let pb = build_prebeamformers(
        &[set(0, vec![0, 1, 2]), set(1, vec![5, 6]), set(2, vec![15])],
        &basis,
    )
    .unwrap();
    assert!(pb.is_disjoint());
    assert!(max_abs_diff(&pb.gram(), &CMat::identity(6, 6)) < 1e-12);
    assert_eq!(pb.stacked().shape(), (16, 6));
}

#[test]
fn overlaps_are_recorded_not_rejected() {
    let basis = DftBasis::ula(8);
    let pb = build_prebeamformers(
        &[set(0, vec![1, 2]), set(1, vec![2, 3]), set(2, vec![2])],
        &basis,
    )
    .unwrap();
    assert!(!pb.is_disjoint());
    assert_eq!(pb.overlaps.get(&2), Some(&vec![0, 1, 2]));
    assert!(build_prebeamformers(&[set(0, vec![8])], &basis).is_err());
}

#[test]
fn release_can_empty_a_group() {
    let out = resolve_overlap_release(&[vec![1, 2], vec![2], vec![4]]);
    assert_eq!(out.sets, vec![vec![1], vec![], vec![4]]);
    assert_eq!(out.emptied, vec![1]);
}

#[test]
fn downlink_budget_is_antenna_count() {
    let vc = VirtualChannel {
        support: set(4, vec![0, 1, 2]),
        matrix: common::gaussian(3, 2, 1),
    };
    let m = &assemble_downlink(&[vc], 10.0)[0];
    assert_eq!(m.group, 4);
    assert_eq!(m.budget, 2.0);
    assert_eq!(m.channel.shape(), (2, 3));
    assert_eq!(m.streams(), 2);
    assert!((m.noise_var - 0.1).abs() < 1e-15);
}

#[test]
fn cascade_reduces_exactly_for_channels_inside_their_support() {
    // H_g = F_{S_g} X_g lies in the span of its own beams: no deviation, no leakage
    let basis = DftBasis::ula(12);
    let sets = [vec![0, 1, 2], vec![6, 7]];
    let supports: Vec<SupportSet> = sets
        .iter()
        .enumerate()
        .map(|(g, s)| set(g, s.clone()))
        .collect();
    let pb = build_prebeamformers(&supports, &basis).unwrap();
    let uplinks: Vec<CMat> = pb
        .blocks
        .iter()
        .enumerate()
        .map(|(g, b)| b * common::gaussian(b.ncols(), 2, g as u64))
        .collect();
    let precoders: Vec<CMat> = sets
        .iter()
        .enumerate()
        .map(|(g, s)| common::gaussian(s.len(), 2, 10 + g as u64))
        .collect();
    for r in cascade_analysis(&uplinks, &pb, &precoders).unwrap() {
        assert!(r.deviation_sq < 1e-20 * (1.0 + r.full_sq));
        assert!(r.interference < 1e-20 * (1.0 + r.full_sq));
        assert!(r.signal > 0.0);
    }
    // F_S has orthonormal columns, so it leaves the singular values alone
    let virtual_dl = (pb.blocks[0].adjoint() * &uplinks[0]).adjoint();
    assert!(prebeamformer_sv_gap(&virtual_dl, &pb.blocks[0]) < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn released_sets_are_pairwise_disjoint(sets in prop::collection::vec(prop::collection::vec(0usize..20, 0..8), 1..6)) {
        let out = resolve_overlap_release(&sets);
        for (a, sa) in out.sets.iter().enumerate() {
            let orig: BTreeSet<_> = sets[a].iter().collect();
            prop_assert!(sa.iter().all(|p| orig.contains(p)));
            prop_assert!(sa.windows(2).all(|w| w[0] < w[1]));
            for sb in &out.sets[a + 1..] {
                prop_assert!(sa.iter().all(|p| !sb.contains(p)));
            }
        }
        prop_assert!(shared_bins(&out.sets).is_empty());
    }

    #[test]
    fn cross_blocks_vanish_for_disjoint_supports(split in 1usize..15) {
        let basis = DftBasis::ula(16);
        let a: Vec<usize> = (0..split).collect();
        let b: Vec<usize> = (split..16).collect();
        let pb = build_prebeamformers(&[set(0, a), set(1, b)], &basis).unwrap();
        let cross = pb.blocks[0].adjoint() * &pb.blocks[1];
        prop_assert!(frobenius_sq(&cross) < 1e-24);
    }
}
