// `!(x > 0.0)` is how NaN gets rejected along with the bad values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod distributions;
pub mod error;
pub mod law;
pub mod metrics;
pub mod montecarlo;
pub mod multi_led;
pub mod quadrature;
pub mod scenario;
pub mod single_led;
pub mod two_led;

pub use error::{Error, Result};
