#![allow(dead_code)]

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use vcm_core::linalg::CMat;

/// i.i.d. CN(0, 1) matrix from a seed.
pub fn gaussian(rows: usize, cols: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CMat::from_fn(rows, cols, |_, _| {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn complex_matrix(rows: usize, cols: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), rows * cols).prop_map(move |v| {
        CMat::from_iterator(rows, cols, v.into_iter().map(|(a, b)| Complex64::new(a, b)))
    })
}

/// Haar-ish unitary from the QR factor of a Gaussian matrix.
pub fn unitary(n: usize, seed: u64) -> CMat {
    gaussian(n, n, seed).qr().q()
}
