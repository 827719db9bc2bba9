mod common;

use proptest::prelude::*;
use vcm_core::channel::*;
use vcm_core::linalg::{max_abs_diff, CMat};
use vcm_core::ofdm::*;
use vcm_core::vcm::{DftBasis, SupportSet};
use vcm_core::Error;

fn fs_fixture(seed: u64) -> (FsChannel, DftBasis, SupportSet) {
    let geom = ArrayGeometry::ula(32, 0.5);
    let g = GroupScenario::ula(1, 70.0, 5.0, 3, vec![2, 1]);
    let fs = synth_fs_channel(&g, &geom, seed, 3).unwrap();
    let support = SupportSet {
        group: 1,
        indices: (0..32).collect(),
        captured: 1.0,
    };
    (fs, DftBasis::ula(32), support)
}

#[test]
fn subcarrier_energy_obeys_parseval() {
    let taps: Vec<CMat> = (0..3).map(|l| common::gaussian(4, 2, l)).collect();
    let q_count = 16;
    let total: f64 = (0..q_count)
        .map(|q| frequency_response(&taps, q, q_count).norm_squared())
        .sum();
    let tap_energy: f64 = taps.iter().map(|t| t.norm_squared()).sum();
    assert!((total - q_count as f64 * tap_energy).abs() < 1e-9 * total);
}

#[test]
fn flat_channel_has_identical_subcarriers() {
    let taps = vec![common::gaussian(3, 3, 1)];
    assert!(
        max_abs_diff(
            &frequency_response(&taps, 0, 8),
            &frequency_response(&taps, 5, 8)
        ) < 1e-15
    );
}

#[test]
fn per_user_rows_split_the_downlink() {
    let (fs, basis, support) = fs_fixture(4);
    let per_q = per_subcarrier_channels(&fs, &basis, &support, 64).unwrap();
    assert_eq!(per_q.len(), 64);
    let ch = &per_q[7];
    assert_eq!(ch.downlink.shape(), (3, 32));
    assert_eq!(ch.user_downlink(0).unwrap().nrows(), 2);
    assert_eq!(ch.user_downlink(1).unwrap().nrows(), 1);
    assert!(ch.user_downlink(2).is_err());
    assert!(per_subcarrier_channels(&fs, &basis, &support, 2).is_err());
    let p = common::gaussian(32, 1, 9);
    let eff = per_user_receiver_model(ch, 1, &p, 0.5).unwrap();
    assert_eq!(eff.g.shape(), (1, 1));
}

#[test]
fn adjacent_subcarriers_are_close() {
    let (fs, basis, support) = fs_fixture(12);
    let per_q = per_subcarrier_channels(&fs, &basis, &support, 64).unwrap();
    let near = lemma4_check(&per_q, 10, 11, None).unwrap();
    let far = lemma4_check(&per_q, 10, 42, None).unwrap();
    assert!(near < 0.2, "adjacent deviation {near}");
    assert!(near < far, "adjacent {near} vs distant {far}");
    assert!(lemma4_check(&per_q, 0, 0, Some(0)).unwrap() == 0.0);
}

#[test]
fn chain_of_conflicts_needs_only_two_blocks() {
    // 1-2 and 2-3 conflict, 1-3 do not: groups 1 and 3 can share subcarriers
    let a = cfsdm_assign(
        &[1, 2, 3],
        &[vec![0, 1], vec![1, 2], vec![2, 3]],
        &[2, 2, 2],
        64,
    )
    .unwrap();
    assert!(a.is_valid());
    assert_eq!(a.used, 4);
    assert_eq!(a.conflicts, vec![(1, 2), (2, 3)]);
}

#[test]
fn pairwise_conflicts_need_disjoint_blocks() {
    let a = cfsdm_assign(
        &[1, 2, 3],
        &[vec![0, 1], vec![1, 2], vec![0, 2]],
        &[2, 2, 2],
        64,
    )
    .unwrap();
    assert!(a.is_valid());
    assert_eq!(a.used, 6);
    assert!(a.to_json().unwrap().contains("\"subcarrier\""));
}

#[test]
fn capacity_shortfall_is_reported() {
    match cfsdm_assign(&[1, 2], &[vec![0], vec![0]], &[3, 3], 4) {
        Err(Error::Capacity { needed, available }) => assert_eq!((needed, available), (6, 4)),
        other => panic!("expected capacity error, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn assignments_are_always_valid(
        supports in prop::collection::vec(prop::collection::vec(0usize..12, 1..5), 1..7),
        users in prop::collection::vec(1usize..4, 7),
    ) {
        let g = supports.len();
        let ids: Vec<usize> = (1..=g).collect();
        let users = &users[..g];
        let a = cfsdm_assign(&ids, &supports, users, 1000).unwrap();
        prop_assert!(a.is_valid());
        prop_assert_eq!(a.rows.len(), users.iter().sum::<usize>());
        for (i, &id) in ids.iter().enumerate() {
            for k in 0..users[i] {
                prop_assert!(a.subcarrier(id, k).is_some());
            }
        }
        prop_assert!(a.used <= users.iter().sum::<usize>());
        prop_assert!(a.used >= users.iter().copied().max().unwrap());
    }
}
