use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpStatus, RowKind, Sense};
use crate::model::{Family, PhiInstance, PhiKind};
use crate::scalar::Real;

use super::{expectation, WorstCase, MAX_CUTS, MEMBERSHIP_TOL};

/// Cutting planes on the divergence ball.
///
/// The master is `max hᵀp` on the simplex plus accumulated cuts. When the
/// master point leaves the ball, the segment from the reference to it is
/// bisected to find the boundary point, which is feasible and gives a lower
/// bound; the tangent plane of the divergence there is added as the next
/// cut. Cutting at boundary points keeps the gradient finite under KL even
/// when the master point has zero entries.
pub fn solve_phi<T: Real>(inst: &PhiInstance<T>) -> Result<WorstCase<T>> {
    let n = inst.costs.len();
    if inst.radius < T::zero() {
        return Err(Error::param("radius", inst.radius.as_f64(), "must be nonnegative"));
    }
    if inst.phi == PhiKind::Kl && inst.reference.iter().any(|&r| r <= T::zero()) {
        return Err(Error::param("weights", 0.0, "reference weights must be positive under KL"));
    }
    let reference = &inst.reference;
    let done = |p: Vec<T>, active: Vec<String>, iterations| WorstCase {
        family: Family::Phi,
        value: expectation(&p, &inst.costs),
        p,
        active,
        plan: None,
        iterations,
    };
    if inst.radius == T::zero() {
        return Ok(done(reference.clone(), vec!["divergence".into()], 0));
    }

    let mut master = LinearProgram::new(Sense::Maximize, inst.costs.clone());
    master.add_row(vec![T::one(); n], RowKind::Eq, T::one());
    for k in 0..n {
        // Mass off the reference support has infinite divergence.
        let ub = if reference[k] > T::zero() { T::one() } else { T::zero() };
        master.set_bounds(k, T::zero(), ub);
    }
    let feas_tol = T::tol(MEMBERSHIP_TOL);
    let gap_tol = T::tol(1e-10);
    let mut best: Option<(T, Vec<T>)> = None;

    for cuts in 0..=MAX_CUTS {
        let sol = master.solve()?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Invalid(format!("divergence master reported {:?}", sol.status)));
        }
        let upper = sol.objective;
        let p = sol.x;
        let div = inst.phi.divergence(&p, reference);
        if div <= inst.radius + feas_tol {
            let active = if div >= inst.radius - feas_tol {
                vec!["divergence".to_string()]
            } else {
                Vec::new()
            };
            return Ok(done(p, active, cuts));
        }
        let boundary = boundary_point(inst, &p);
        let lower = expectation(&boundary, &inst.costs);
        if best.as_ref().map_or(true, |(v, _)| lower > *v) {
            best = Some((lower, boundary.clone()));
        }
        let (best_value, best_p) = best.as_ref().unwrap();
        if upper - *best_value <= gap_tol * (T::one() + upper.abs()) {
            return Ok(done(best_p.clone(), vec!["divergence".into()], cuts));
        }
        if cuts == MAX_CUTS {
            return Err(Error::Tolerance {
                what: "divergence cutting planes".into(),
                iterations: cuts,
                lower: best_value.as_f64(),
                upper: upper.as_f64(),
            });
        }
        // D(b) + ∇D(b)ᵀ(p − b) ≤ radius
        let grad: Vec<T> = (0..n)
            .map(|k| {
                if reference[k] > T::zero() {
                    inst.phi.derivative(boundary[k] / reference[k])
                } else {
                    T::zero()
                }
            })
            .collect();
        let at_b = inst.phi.divergence(&boundary, reference);
        let rhs = inst.radius - at_b + crate::scalar::dot(&grad, &boundary);
        master.add_row(grad, RowKind::Le, rhs);
    }
    unreachable!("loop returns by the cut budget")
}

/// Largest feasible point on the segment from the reference to `p`.
fn boundary_point<T: Real>(inst: &PhiInstance<T>, p: &[T]) -> Vec<T> {
    let at = |theta: T| -> Vec<T> {
        inst.reference
            .iter()
            .zip(p)
            .map(|(&r, &q)| r + theta * (q - r))
            .collect()
    };
    let (mut lo, mut hi) = (T::zero(), T::one());
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if inst.phi.divergence(&at(mid), &inst.reference) <= inst.radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo)
}
