use serde::Serialize;

use crate::scalar::Real;

use super::{LinearProgram, RowKind, Sense};

/// A finite variable bound that became an explicit row of the dual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub var: usize,
    pub kind: RowKind,
}

/// The dual LP together with the bookkeeping needed to map its solution
/// back onto the primal rows.
///
/// Dual variable `k < primal_rows` is the multiplier of primal row `k`, with
/// the same sign convention as [`super::LpSolution::duals`]. Variables past
/// that belong to the bound rows listed in `bound_rows`.
#[derive(Debug, Clone, Serialize)]
pub struct DualProgram<T> {
    pub lp: LinearProgram<T>,
    pub primal_rows: usize,
    pub bound_rows: Vec<BoundRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SignClass {
    NonNeg,
    NonPos,
    Free,
}

impl<T: Real> LinearProgram<T> {
    /// Writes down the dual LP.
    ///
    /// Each variable is classified as `≥ 0`, `≤ 0` or free from its bounds;
    /// any remaining finite bound becomes an extra primal row. The dual of a
    /// maximization is a minimization of `Σ y_i b_i` with `y_i ≥ 0` on `≤`
    /// rows, `y_i ≤ 0` on `≥` rows and `y_i` free on equalities; column `j`
    /// gives a dual row `Σ_i y_i A_ij ≥ c_j` (`x_j ≥ 0`), `≤ c_j` (`x_j ≤ 0`)
    /// or `= c_j` (free). A minimization dualizes with every sign reversed.
    pub fn dual(&self) -> DualProgram<T> {
        let n = self.num_vars();
        let mut classes = Vec::with_capacity(n);
        let mut bound_rows = Vec::new();
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            let class = if l >= T::zero() {
                SignClass::NonNeg
            } else if u <= T::zero() {
                SignClass::NonPos
            } else {
                SignClass::Free
            };
            let l_implied = class == SignClass::NonNeg && l == T::zero();
            let u_implied = class == SignClass::NonPos && u == T::zero();
            if l.is_finite() && !l_implied {
                bound_rows.push(BoundRow { var: j, kind: RowKind::Ge });
            }
            if u.is_finite() && !u_implied {
                bound_rows.push(BoundRow { var: j, kind: RowKind::Le });
            }
            classes.push(class);
        }

        let m = self.num_rows();
        let total = m + bound_rows.len();
        let mut rhs_all: Vec<T> = self.rows.iter().map(|r| r.rhs).collect();
        let mut kinds: Vec<RowKind> = self.rows.iter().map(|r| r.kind).collect();
        for br in &bound_rows {
            rhs_all.push(if br.kind == RowKind::Ge {
                self.lower[br.var]
            } else {
                self.upper[br.var]
            });
            kinds.push(br.kind);
        }

        let (dual_sense, nonneg_kind, nonpos_kind) = match self.sense {
            Sense::Maximize => (Sense::Minimize, RowKind::Le, RowKind::Ge),
            Sense::Minimize => (Sense::Maximize, RowKind::Ge, RowKind::Le),
        };

        let mut dual = LinearProgram::new(dual_sense, rhs_all);
        for (k, kind) in kinds.iter().enumerate() {
            let (lo, hi) = if *kind == RowKind::Eq {
                (T::neg_infinity(), T::infinity())
            } else if *kind == nonneg_kind {
                (T::zero(), T::infinity())
            } else {
                debug_assert_eq!(*kind, nonpos_kind);
                (T::neg_infinity(), T::zero())
            };
            dual.set_bounds(k, lo, hi);
        }

        for j in 0..n {
            let mut coeffs = vec![T::zero(); total];
            for (i, row) in self.rows.iter().enumerate() {
                coeffs[i] = row.coeffs[j];
            }
            for (k, br) in bound_rows.iter().enumerate() {
                if br.var == j {
                    coeffs[m + k] = T::one();
                }
            }
            let kind = match (self.sense, classes[j]) {
                (_, SignClass::Free) => RowKind::Eq,
                (Sense::Maximize, SignClass::NonNeg) | (Sense::Minimize, SignClass::NonPos) => {
                    RowKind::Ge
                }
                (Sense::Maximize, SignClass::NonPos) | (Sense::Minimize, SignClass::NonNeg) => {
                    RowKind::Le
                }
            };
            dual.add_row(coeffs, kind, self.cost[j]);
        }

        DualProgram {
            lp: dual,
            primal_rows: m,
            bound_rows,
        }
    }
}
