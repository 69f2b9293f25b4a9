//! Exact construction and certification of the family of gauge functions
//! `f_xi(x) = x^alpha * phi_xi(x)` indexed by binary strings, together with
//! the reduction `theta_1` at finite truncation.
//!
//! All arithmetic is over arbitrary-precision rationals. Nothing here uses
//! floating point except the advisory decimal columns of exports.

// errors carry the offending rationals; they are cold paths
#![allow(clippy::result_large_err)]

pub mod archive;
pub mod canon;
pub mod certify;
pub mod dyadic;
pub mod error;
pub mod kappa;
pub mod params;
pub mod phi;
pub mod rational;
pub mod reduction;
pub mod report;
pub mod tree;

pub use error::{Error, Result};
pub use params::{make_params, Params};
pub use rational::Rational;
pub use report::CertReport;
