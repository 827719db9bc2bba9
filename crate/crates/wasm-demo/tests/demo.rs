use vcm_wasm_demo::{demo_channel, mi_curves, ula_spectrum, upa_support_map};

#[test]
fn spectrum_support_sits_on_the_cluster() {
    let s = ula_spectrum(64, 0.5, 60.0, 3.0, 5, 2, 1.0, 7).unwrap();
    assert_eq!(s.power.len(), 64);
    assert!(!s.support.is_empty() && s.rho > 0.8);
    // cos 60 = 0.5 puts the main lobe near beam 64 * 0.5 * 0.5 = 16 (1-based 17)
    assert!(
        s.support.iter().all(|&b| (12..=22).contains(&b)),
        "{:?}",
        s.support
    );
}

#[test]
fn support_map_is_square() {
    let m = upa_support_map(8, 0.5, 40.0, 30.0, 2.0, 2, 1.0, 1).unwrap();
    assert_eq!(m.power.len(), 64);
    assert!(m.support.iter().all(|&b| (1..=64).contains(&b)));
}

#[test]
fn invalid_inputs_are_errors() {
    assert!(ula_spectrum(0, 0.5, 60.0, 3.0, 5, 2, 1.0, 7).is_err());
    assert!(upa_support_map(8, 0.5, 179.0, 0.0, 4.0, 2, 1.0, 1).is_err());
    assert!(mi_curves(1.0, 0.5, 10.0, 32, &[0.0]).is_err());
}

#[test]
fn curves_are_ordered() {
    let c = mi_curves(1.0, 0.3, 25.0, 4, &[-5.0, 5.0, 15.0]).unwrap();
    for i in 0..3 {
        assert!(c.optimized[i] >= c.svapb[i] - 1e-6);
        assert!(c.optimized[i] <= 4.0 + 1e-9);
    }
    assert!(c.none.windows(2).all(|w| w[0] <= w[1] + 1e-9));
}

#[test]
fn demo_channel_singular_values() {
    let h = demo_channel(2.0, 0.5, 33.0);
    let sv = vcm_core::linalg::singular_values(&h);
    assert!((sv[0] - 2.0).abs() < 1e-12 && (sv[1] - 0.5).abs() < 1e-12);
}
