use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::lp::{LinearProgram, LpStatus, RowKind, Sense};
use crate::model::{Family, WInstance};
use crate::scalar::Real;

use super::WorstCase;

/// Transport LP over `(p, w)`.
///
/// Columns: `p_0..p_{N-1}`, then `w_ij` at `N + i·N + j`. Rows: `N` source
/// marginals `Σ_j w_ij = ref_i`, `N` target marginals `Σ_i w_ij − p_j = 0`,
/// the budget `Σ dist_ij w_ij ≤ radius`, and `Σ p = 1` when
/// `with_normalization` (it is implied by the marginals).
pub fn w_lp<T: Real>(inst: &WInstance<T>, with_normalization: bool) -> LinearProgram<T> {
    let n = inst.costs.len();
    let mut cost = inst.costs.clone();
    cost.extend(std::iter::repeat(T::zero()).take(n * n));
    let mut lp = LinearProgram::new(Sense::Maximize, cost);
    let w = |i: usize, j: usize| n + i * n + j;
    for i in 0..n {
        let entries: Vec<_> = (0..n).map(|j| (w(i, j), T::one())).collect();
        lp.add_sparse_row(&entries, RowKind::Eq, inst.reference[i]);
    }
    for j in 0..n {
        let mut entries: Vec<_> = (0..n).map(|i| (w(i, j), T::one())).collect();
        entries.push((j, -T::one()));
        lp.add_sparse_row(&entries, RowKind::Eq, T::zero());
    }
    let budget: Vec<_> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j)
        .map(|(i, j)| (w(i, j), inst.dist[(i, j)]))
        .collect();
    lp.add_sparse_row(&budget, RowKind::Le, inst.radius);
    if with_normalization {
        let entries: Vec<_> = (0..n).map(|j| (j, T::one())).collect();
        lp.add_sparse_row(&entries, RowKind::Eq, T::one());
    }
    lp
}

pub fn solve_w<T: Real>(inst: &WInstance<T>) -> Result<WorstCase<T>> {
    if inst.radius < T::zero() {
        return Err(Error::InvalidParameter {
            name: "radius".into(),
            value: inst.radius.as_f64(),
            reason: "must be nonnegative".into(),
        });
    }
    let n = inst.costs.len();
    let lp = w_lp(inst, true);
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Invalid(format!(
            "transport LP reported {:?}",
            sol.status
        )));
    }
    let mut plan = Matrix::zeros(n, n);
    let mut used = T::zero();
    for i in 0..n {
        for j in 0..n {
            plan[(i, j)] = sol.x[n + i * n + j];
            used += plan[(i, j)] * inst.dist[(i, j)];
        }
    }
    let mut active = Vec::new();
    if (used - inst.radius).abs() <= T::tol(super::MEMBERSHIP_TOL) * (T::one() + inst.radius) {
        active.push("transport budget".to_string());
    }
    Ok(WorstCase {
        family: Family::W,
        value: sol.objective,
        p: sol.x[..n].to_vec(),
        active,
        plan: Some(plan),
        iterations: sol.iterations,
    })
}
