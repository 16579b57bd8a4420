//! Distributionally robust optimization with decision-dependent ambiguity
//! sets.
//!
//! [`model`] holds the problem description, [`inner`] computes the
//! worst-case expectation at a fixed decision, [`dual`] certifies it from
//! the dual side, [`sip`] handles the continuous-support families and
//! [`outer`] searches over decisions. The numerical code is generic over
//! [`Real`]; the aliases below fix it to `f64`.

pub mod dual;
pub mod error;
pub mod expr;
pub mod inner;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod outer;
pub mod scalar;
pub mod sip;

pub use error::{Error, Result};
pub use scalar::Real;

pub type LinearProgram = lp::LinearProgram<f64>;
pub type LpSolution = lp::LpSolution<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type WorstCase = inner::WorstCase<f64>;
pub type DualCertificate = dual::DualCertificate<f64>;
pub type SipState = sip::SipState<f64>;
pub type SipProblem<'a> = sip::SipProblem<'a, f64>;
pub type Evaluation = outer::Evaluation<f64>;
