use crate::error::Result;
use crate::lp::{LinearProgram, LpStatus, RowKind, Sense};
use crate::model::{Family, SmInstance};
use crate::scalar::Real;

use super::{empty_set, WorstCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmRowSide {
    Lower,
    Upper,
    /// Lower and upper bounds coincide.
    Both,
}

/// Which moment row and side an LP row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmRow {
    pub moment: usize,
    pub side: SmRowSide,
}

/// `max hᵀp` over the moment rows with `p_lower ≤ p ≤ p_upper`. Negative
/// lower bounds are raised to 0.
pub fn sm_lp<T: Real>(inst: &SmInstance<T>) -> (LinearProgram<T>, Vec<SmRow>) {
    let n = inst.costs.len();
    let mut lp = LinearProgram::new(Sense::Maximize, inst.costs.clone());
    for k in 0..n {
        lp.set_bounds(k, inst.p_lower[k].max(T::zero()), inst.p_upper[k]);
    }
    let mut map = Vec::new();
    for (r, f) in inst.moments.iter().enumerate() {
        let (l, u) = (inst.lower[r], inst.upper[r]);
        if l == u {
            lp.add_row(f.clone(), RowKind::Eq, l);
            map.push(SmRow {
                moment: r,
                side: SmRowSide::Both,
            });
            continue;
        }
        if l.is_finite() {
            lp.add_row(f.clone(), RowKind::Ge, l);
            map.push(SmRow {
                moment: r,
                side: SmRowSide::Lower,
            });
        }
        if u.is_finite() {
            lp.add_row(f.clone(), RowKind::Le, u);
            map.push(SmRow {
                moment: r,
                side: SmRowSide::Upper,
            });
        }
    }
    (lp, map)
}

pub fn solve_sm<T: Real>(inst: &SmInstance<T>) -> Result<WorstCase<T>> {
    let (lp, map) = sm_lp(inst);
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        // The objective is bounded on the simplex, so anything else is empty.
        return Err(empty_set("moment and probability bounds admit no distribution"));
    }
    let tol = T::tol(super::MEMBERSHIP_TOL);
    let mut active = Vec::new();
    for (row, act) in map.iter().zip(lp.activity(&sol.x)) {
        let name = if row.moment == 0 {
            "normalization".to_string()
        } else {
            format!("moment {}", row.moment)
        };
        match row.side {
            SmRowSide::Both if row.moment > 0 => active.push(format!("{name} fixed")),
            SmRowSide::Lower if (act - inst.lower[row.moment]).abs() <= tol => {
                active.push(format!("{name} lower"))
            }
            SmRowSide::Upper if (act - inst.upper[row.moment]).abs() <= tol => {
                active.push(format!("{name} upper"))
            }
            _ => {}
        }
    }
    for (k, &pk) in sol.x.iter().enumerate() {
        if inst.p_lower[k] > T::zero() && (pk - inst.p_lower[k]).abs() <= tol {
            active.push(format!("p[{k}] lower"));
        }
        if (pk - inst.p_upper[k]).abs() <= tol {
            active.push(format!("p[{k}] upper"));
        }
    }
    Ok(WorstCase {
        family: Family::Sm,
        value: sol.objective,
        p: sol.x,
        active,
        plan: None,
        iterations: sol.iterations,
    })
}
