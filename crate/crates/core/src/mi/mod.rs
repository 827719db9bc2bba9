//! Finite-alphabet mutual information of `y = G x + n` with `n ~ CN(0, sigma^2 I)`
//! and unit-energy QAM symbols: Gauss-Hermite evaluation, a Monte-Carlo oracle,
//! the MMSE matrix and the precoder gradient.

mod constellation;
mod engine;
mod quadrature;

pub use constellation::Constellation;
pub use engine::*;
pub use quadrature::{gauss_hermite, QuadratureGrid};
