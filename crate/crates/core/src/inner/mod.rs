//! Worst-case expectation `Φ(x) = max_{p ∈ P(x)} Σ p_k h(x, ξᵏ)` over the
//! finite-support families.
//!
//! Each family has a numeric solver taking the instance built by
//! [`crate::model`] and a spec-level wrapper that builds the instance at `x`.
//! The moment, transport and CDF-band families are single LPs. The
//! ellipsoidal and divergence families run a cutting-plane loop over an LP
//! master on the simplex.

mod dy;
mod ks;
mod membership;
mod phi;
mod sm;
mod w;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{Family, ProblemSpec};
use crate::scalar::Real;

pub use dy::{slater_point, solve_dy, DyCut, DyMaster};
pub use ks::{ks_lp, solve_ks};
pub use membership::{
    contains_dy, contains_ks, contains_phi, contains_sm, contains_w, transport_distance,
};
pub use phi::solve_phi;
pub use sm::{sm_lp, solve_sm, SmRow, SmRowSide};
pub use w::{solve_w, w_lp};

/// Feasibility tolerance for reported distributions.
pub const MEMBERSHIP_TOL: f64 = 1e-7;

/// Cut budget for the cutting-plane families.
pub const MAX_CUTS: usize = 500;

/// Result of an inner maximization.
#[derive(Debug, Clone, Serialize)]
pub struct WorstCase<T> {
    pub family: Family,
    /// `Σ p_k h_k`, excluding the first-stage cost.
    pub value: T,
    /// Maximizing distribution over the scenarios.
    pub p: Vec<T>,
    /// Constraints binding at `p`.
    pub active: Vec<String>,
    /// Transport plan for the Wasserstein family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<Matrix<T>>,
    /// Simplex pivots for LP families, cuts for the cutting-plane ones.
    pub iterations: usize,
}

pub fn worst_case_sm<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<WorstCase<T>> {
    solve_sm(&spec.sm_instance(x)?).map_err(|e| located(e, x))
}

pub fn worst_case_dy<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<WorstCase<T>> {
    let inst = spec.dy_instance(x)?;
    match solve_dy(&inst) {
        Ok(master) => Ok(master.worst_case),
        Err(_) if slater_point(&inst)?.is_none() => Err(slater_violated()),
        Err(e) => Err(e),
    }
}

pub(crate) fn slater_violated() -> Error {
    Error::SlaterViolated {
        family: "dy".into(),
        detail: "no distribution is strictly inside both moment constraints".into(),
    }
}

pub fn worst_case_w<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<WorstCase<T>> {
    solve_w(&spec.w_instance(x)?)
}

pub fn worst_case_phi<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<WorstCase<T>> {
    solve_phi(&spec.phi_instance(x)?)
}

pub fn worst_case_ks<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<WorstCase<T>> {
    solve_ks(&spec.ks_instance(x)?)
}

/// Dispatches on the finite-support family of `spec`.
pub fn worst_case<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<WorstCase<T>> {
    match spec.family() {
        Family::Sm => worst_case_sm(spec, x),
        Family::Dy => worst_case_dy(spec, x),
        Family::W => worst_case_w(spec, x),
        Family::Phi => worst_case_phi(spec, x),
        Family::Ks => worst_case_ks(spec, x),
        f @ (Family::Wc | Family::Ksc) => Err(Error::Unsupported {
            family: f.to_string(),
            operation: "the finite-support worst case (use the sip module)".into(),
        }),
    }
}

/// Fills in the decision for emptiness errors raised by numeric solvers.
fn located<T: Real>(e: Error, x: &[T]) -> Error {
    match e {
        Error::AmbiguityEmpty { x: at, detail } if at.is_empty() => Error::AmbiguityEmpty {
            x: x.iter().map(|v| v.as_f64()).collect(),
            detail,
        },
        other => other,
    }
}

fn empty_set(detail: impl Into<String>) -> Error {
    Error::AmbiguityEmpty {
        x: Vec::new(),
        detail: detail.into(),
    }
}

fn expectation<T: Real>(p: &[T], h: &[T]) -> T {
    crate::scalar::dot(p, h)
}
