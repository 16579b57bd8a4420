use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpStatus, RowKind, Sense};
use crate::model::{Family, KsInstance};
use crate::scalar::Real;

use super::WorstCase;

/// CDF-band LP over `p`.
///
/// Row 0 is `Σ p = 1`. For the `k`-th prefix of `order`, row `1 + 2k` is
/// `Σ_{j ≤ k} p_{order[j]} ≤ c_k + radius` and row `2 + 2k` is the matching
/// `≥ c_k − radius`, where `c_k` is the reference prefix sum.
pub fn ks_lp<T: Real>(inst: &KsInstance<T>) -> LinearProgram<T> {
    let n = inst.costs.len();
    let mut lp = LinearProgram::new(Sense::Maximize, inst.costs.clone());
    lp.add_row(vec![T::one(); n], RowKind::Eq, T::one());
    let mut coeffs = vec![T::zero(); n];
    let mut cum = T::zero();
    for &k in &inst.order {
        coeffs[k] = T::one();
        cum += inst.reference[k];
        lp.add_row(coeffs.clone(), RowKind::Le, cum + inst.radius);
        lp.add_row(coeffs.clone(), RowKind::Ge, cum - inst.radius);
    }
    lp
}

pub fn solve_ks<T: Real>(inst: &KsInstance<T>) -> Result<WorstCase<T>> {
    if inst.radius < T::zero() {
        return Err(Error::InvalidParameter {
            name: "radius".into(),
            value: inst.radius.as_f64(),
            reason: "must be nonnegative".into(),
        });
    }
    let lp = ks_lp(inst);
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Invalid(format!("CDF-band LP reported {:?}", sol.status)));
    }
    let tol = T::tol(super::MEMBERSHIP_TOL);
    let mut active = Vec::new();
    let act = lp.activity(&sol.x);
    for k in 0..inst.order.len().saturating_sub(1) {
        let (up, lo) = (&lp.rows[1 + 2 * k], &lp.rows[2 + 2 * k]);
        if (act[1 + 2 * k] - up.rhs).abs() <= tol {
            active.push(format!("prefix {} upper", k + 1));
        } else if (act[2 + 2 * k] - lo.rhs).abs() <= tol {
            active.push(format!("prefix {} lower", k + 1));
        }
    }
    Ok(WorstCase {
        family: Family::Ks,
        value: sol.objective,
        p: sol.x,
        active,
        plan: None,
        iterations: sol.iterations,
    })
}
