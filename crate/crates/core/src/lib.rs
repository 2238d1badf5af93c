//! Exact and Monte Carlo MMSE estimation, linear MMSE, stochastic
//! degradedness of finite channels, and a catalog of sequence scenarios that
//! probe when the MMSE is continuous in the underlying law.
//!
//! ```
//! use mmse_lab::{exact::mmse_exact, laws};
//!
//! // X, N independent Rademacher, Y = X + N.
//! let r = mmse_exact(&laws::rademacher_sum()).unwrap();
//! assert_eq!(r.mmse, 0.5);
//! ```

mod error;

pub mod degradedness;
pub mod exact;
pub mod lab;
pub mod laws;
pub mod lmmse;
pub mod mc;
pub mod numeric;
pub mod prob;
pub mod random;
pub mod rng;
pub mod selftest;

pub use error::{Error, Result};
