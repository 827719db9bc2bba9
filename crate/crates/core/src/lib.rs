pub mod channel;
pub mod error;
pub mod jsdm;
pub mod linalg;
pub mod mi;
pub mod ofdm;
pub mod par;
pub mod precoder;
pub mod rng;
pub mod runner;
pub mod vcm;

pub use error::{Error, Result};
