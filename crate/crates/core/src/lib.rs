// Validation writes `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod tensor;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub mod env;
pub mod model;
pub mod mps;
pub mod exact;
pub mod dmrg;
pub mod tdvp;
pub mod protocol;
pub mod rng;
pub mod single_site;
pub mod observables;
