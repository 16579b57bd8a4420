//! Dense linear programming.
//!
//! [`LinearProgram`] holds a small dense LP with general variable bounds and
//! tagged rows. [`LinearProgram::solve`] runs a two-phase tableau simplex and
//! returns primal values, one multiplier per row and reduced costs.
//! [`LinearProgram::dual`] writes down the dual LP mechanically.
//!
//! Multipliers are shadow prices: `duals[i]` is the rate of change of the
//! optimal objective with respect to `rhs[i]`. For a maximization this makes
//! `≤` rows nonnegative and `≥` rows nonpositive; for a minimization the signs
//! flip. At an optimum
//!
//! ```text
//! objective = Σ duals[i]·rhs[i] + Σ reduced_costs[j]·x[j]
//! ```
//!
//! and a reduced cost is nonzero only for a variable sitting at a bound.

mod dual;
mod simplex;

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Real;

pub use dual::{BoundRow, DualProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowKind {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, Serialize)]
pub struct Row<T> {
    pub coeffs: Vec<T>,
    pub kind: RowKind,
    pub rhs: T,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("LP dimension mismatch: {0}")]
    Dimension(String),
    #[error("LP data is not finite: {0}")]
    NonFinite(String),
    #[error("variable {0} has lower bound above upper bound")]
    EmptyBounds(usize),
    #[error("simplex iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("optimal basis is numerically singular")]
    SingularBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Serialize)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Primal values; empty unless optimal.
    pub x: Vec<T>,
    /// Row multipliers (shadow prices); empty unless optimal.
    pub duals: Vec<T>,
    /// `c_j − Σ_i duals[i]·A[i][j]`; empty unless optimal.
    pub reduced_costs: Vec<T>,
    /// Objective value; NaN unless optimal.
    pub objective: T,
    pub iterations: usize,
}

impl<T: Real> LpSolution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Dense LP: optimize `cᵀx` subject to tagged rows and `lower ≤ x ≤ upper`.
/// Bounds may be infinite.
#[derive(Debug, Clone, Serialize)]
pub struct LinearProgram<T> {
    pub sense: Sense,
    pub cost: Vec<T>,
    pub rows: Vec<Row<T>>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> LinearProgram<T> {
    /// `n` variables with bounds `[0, +∞)` and no rows.
    pub fn new(sense: Sense, cost: Vec<T>) -> Self {
        let n = cost.len();
        Self {
            sense,
            cost,
            rows: Vec::new(),
            lower: vec![T::zero(); n],
            upper: vec![T::infinity(); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Appends a row and returns its index.
    pub fn add_row(&mut self, coeffs: Vec<T>, kind: RowKind, rhs: T) -> usize {
        self.rows.push(Row { coeffs, kind, rhs });
        self.rows.len() - 1
    }

    /// Appends a row given as sparse `(column, coefficient)` pairs.
    pub fn add_sparse_row(&mut self, entries: &[(usize, T)], kind: RowKind, rhs: T) -> usize {
        let mut coeffs = vec![T::zero(); self.num_vars()];
        for &(j, v) in entries {
            coeffs[j] += v;
        }
        self.add_row(coeffs, kind, rhs)
    }

    pub fn set_bounds(&mut self, j: usize, lower: T, upper: T) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Dimension(format!(
                "{} costs but {} lower / {} upper bounds",
                n,
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(LpError::Dimension(format!(
                    "row {i} has {} coefficients, expected {n}",
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(LpError::NonFinite(format!("row {i}")));
            }
        }
        if self.cost.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("cost vector".into()));
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] == T::infinity()
                || self.upper[j] == T::neg_infinity()
            {
                return Err(LpError::NonFinite(format!("bounds of variable {j}")));
            }
            if self.lower[j] > self.upper[j] {
                return Err(LpError::EmptyBounds(j));
            }
        }
        Ok(())
    }

    /// Solves the LP with the dense two-phase simplex.
    pub fn solve(&self) -> Result<LpSolution<T>, LpError> {
        self.validate()?;
        simplex::solve(self)
    }

    /// Row activity `A x`.
    pub fn activity(&self, x: &[T]) -> Vec<T> {
        self.rows
            .iter()
            .map(|r| crate::scalar::dot(&r.coeffs, x))
            .collect()
    }

    pub fn objective_at(&self, x: &[T]) -> T {
        crate::scalar::dot(&self.cost, x)
    }

    /// Largest violation of rows and bounds at `x`.
    pub fn primal_residual(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for (row, act) in self.rows.iter().zip(self.activity(x)) {
            let v = match row.kind {
                RowKind::Le => act - row.rhs,
                RowKind::Ge => row.rhs - act,
                RowKind::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for j in 0..x.len() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }

    /// Largest `|dual_i · slack_i|` over rows.
    pub fn complementarity(&self, x: &[T], duals: &[T]) -> T {
        self.rows
            .iter()
            .zip(self.activity(x))
            .zip(duals)
            .fold(T::zero(), |w, ((row, act), &y)| {
                w.max((y * (row.rhs - act)).abs())
            })
    }
}
