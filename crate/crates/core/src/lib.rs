// negated comparisons are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod frontend;
pub mod harness;
pub mod receiver;
pub mod rx;
pub mod signal;
pub mod sparse;
pub mod tr;
pub mod tx;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use signal::{BasebandSignal, PassbandSignal};
