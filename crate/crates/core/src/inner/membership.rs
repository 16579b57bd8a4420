//! Direct membership tests, written independently of the solvers so that
//! reported maximizers can be re-checked.

use crate::error::{Error, Result};
use crate::linalg::{solve, symmetric_eigen, Matrix};
use crate::lp::{LinearProgram, LpStatus, RowKind, Sense};
use crate::model::{DyInstance, KsInstance, PhiInstance, SmInstance, WInstance};
use crate::scalar::{dot, Real};

fn on_simplex<T: Real>(p: &[T], tol: T) -> bool {
    let sum: T = p.iter().copied().sum();
    p.iter().all(|&v| v >= -tol) && (sum - T::one()).abs() <= tol
}

pub fn contains_sm<T: Real>(inst: &SmInstance<T>, p: &[T], tol: T) -> bool {
    if !on_simplex(p, tol) {
        return false;
    }
    let bounds_ok = p
        .iter()
        .zip(inst.p_lower.iter().zip(&inst.p_upper))
        .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol);
    let moments_ok = inst
        .moments
        .iter()
        .zip(inst.lower.iter().zip(&inst.upper))
        .all(|(f, (&l, &u))| {
            let m = dot(f, p);
            m >= l - tol && m <= u + tol
        });
    bounds_ok && moments_ok
}

pub fn contains_dy<T: Real>(inst: &DyInstance<T>, p: &[T], tol: T) -> bool {
    if !on_simplex(p, tol) {
        return false;
    }
    let d = inst.mean.len();
    let mut offset: Vec<T> = inst.mean.iter().map(|&m| -m).collect();
    for (&pi, x) in p.iter().zip(&inst.points) {
        for k in 0..d {
            offset[k] += pi * x[k];
        }
    }
    let Some(y) = solve(&inst.cov, &offset, T::min_positive_value()) else {
        return false;
    };
    if dot(&offset, &y) > inst.alpha + tol {
        return false;
    }
    let mut gap = inst.cov.scale(inst.beta);
    for (&pi, x) in p.iter().zip(&inst.points) {
        let c: Vec<T> = x.iter().zip(&inst.mean).map(|(&a, &m)| a - m).collect();
        gap = gap.add(&Matrix::outer(&c).scale(-pi));
    }
    symmetric_eigen(&gap).min_value() >= -tol
}

pub fn contains_w<T: Real>(inst: &WInstance<T>, p: &[T], tol: T) -> Result<bool> {
    if !on_simplex(p, tol) {
        return Ok(false);
    }
    let clipped: Vec<T> = p.iter().map(|&v| v.max(T::zero())).collect();
    let total: T = clipped.iter().copied().sum();
    let q: Vec<T> = clipped.iter().map(|&v| v / total).collect();
    Ok(transport_distance(&q, &inst.reference, &inst.dist)? <= inst.radius + tol)
}

pub fn contains_phi<T: Real>(inst: &PhiInstance<T>, p: &[T], tol: T) -> bool {
    if !on_simplex(p, tol) {
        return false;
    }
    let clipped: Vec<T> = p.iter().map(|&v| v.max(T::zero())).collect();
    inst.phi.divergence(&clipped, &inst.reference) <= inst.radius + tol
}

pub fn contains_ks<T: Real>(inst: &KsInstance<T>, p: &[T], tol: T) -> bool {
    if !on_simplex(p, tol) {
        return false;
    }
    let mut diff = T::zero();
    inst.order.iter().all(|&k| {
        diff += p[k] - inst.reference[k];
        diff.abs() <= inst.radius + tol
    })
}

/// Optimal-transport distance between two distributions on the same points.
pub fn transport_distance<T: Real>(p: &[T], q: &[T], dist: &Matrix<T>) -> Result<T> {
    let n = p.len();
    let cost: Vec<T> = (0..n * n).map(|k| dist[(k / n, k % n)]).collect();
    let mut lp = LinearProgram::new(Sense::Minimize, cost);
    for i in 0..n {
        let row: Vec<_> = (0..n).map(|j| (i * n + j, T::one())).collect();
        lp.add_sparse_row(&row, RowKind::Eq, p[i]);
    }
    for j in 0..n {
        let col: Vec<_> = (0..n).map(|i| (i * n + j, T::one())).collect();
        lp.add_sparse_row(&col, RowKind::Eq, q[j]);
    }
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Invalid("marginals have different mass".into()));
    }
    Ok(sol.objective)
}
