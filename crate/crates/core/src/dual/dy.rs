use serde::Serialize;

use crate::error::{Error, Result};
use crate::inner::{contains_dy, slater_point, slater_violated, solve_dy, DyCut};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::model::{DyInstance, ProblemSpec};
use crate::scalar::{dot, Real};

/// Conic dual of the ellipsoidal-mean, bounded-second-moment worst case.
///
/// `min s + beta·cov•Y + √alpha·z₀ − (S mean)ᵀz₁` subject to
/// `s − ξᵢᵀS z₁ + (ξⁱ − mean)(ξⁱ − mean)ᵀ•Y ≥ h_i` and `u + S z₁ = 0`,
/// with `z = (z₀, z₁)` in the second-order cone, `Y ⪰ 0` of size `d × d`
/// and `S = cov^{-1/2}`.
///
/// The multipliers are assembled from the cutting-plane master: each
/// ellipsoid cut with direction `v` and multiplier `y` adds `y` to `z₀` and
/// `−y·v` to `z₁`, and each eigenvector cut adds `y·vvᵀ` to `Y`.
#[derive(Debug, Clone, Serialize)]
pub struct DyCertificate<T> {
    pub s: T,
    pub u: Vec<T>,
    pub z: Vec<T>,
    pub y: Matrix<T>,
    pub value: T,
    /// Smallest eigenvalue of `y`.
    pub y_min_eigenvalue: T,
    /// Worst case at a feasible point near the master solution.
    pub primal_lower: T,
    /// Whether a strictly feasible distribution was found. Without one the
    /// certificate is still a valid upper bound, and `primal_lower` comes
    /// from the master point, which must then be exactly feasible.
    pub slater: bool,
    pub residual: T,
}

/// Smallest eigenvalue a reported `Y` may have.
pub const PSD_TOL: f64 = 1e-8;

pub fn dy_certificate<T: Real>(inst: &DyInstance<T>) -> Result<DyCertificate<T>> {
    let interior = slater_point(inst)?.map(|(p, _)| p);
    let master = match solve_dy(inst) {
        Ok(m) => m,
        Err(_) if interior.is_none() => return Err(slater_violated()),
        Err(e) => return Err(e),
    };
    let d = inst.mean.len();
    let s_mat = &master.inv_sqrt;

    let mut z0 = T::zero();
    let mut z1 = vec![T::zero(); d];
    let mut y = Matrix::zeros(d, d);
    for (cut, &mult) in master.cuts.iter().zip(&master.duals[1..]) {
        match cut {
            DyCut::Ellipsoid(dir) => {
                z0 += mult;
                for k in 0..d {
                    z1[k] -= mult * dir[k];
                }
            }
            DyCut::Eigen(v) => y = y.add(&Matrix::outer(v).scale(mult)),
        }
    }
    let s_z1 = s_mat.mul_vec(&z1);
    let u: Vec<T> = s_z1.iter().map(|&v| -v).collect();
    // The master prices Σp = 1 with offsets centred at the mean; move that
    // part of the constant into s.
    let s = master.duals[0] + dot(&inst.mean, &s_z1);
    let s_mean = s_mat.mul_vec(&inst.mean);
    let value = s
        + inst.beta * frobenius_inner(&inst.cov, &y)
        + inst.alpha.sqrt() * z0
        - dot(&s_mean, &z1);

    let y_min_eigenvalue = symmetric_eigen(&y).min_value();
    if y_min_eigenvalue < -T::tol(PSD_TOL) {
        return Err(Error::Invalid(format!(
            "assembled second-moment multiplier has eigenvalue {:e}",
            y_min_eigenvalue.as_f64()
        )));
    }

    let mut residual = (dot(&z1, &z1).sqrt() - z0).max(T::zero());
    for (i, xi) in inst.points.iter().enumerate() {
        let c: Vec<T> = xi.iter().zip(&inst.mean).map(|(&a, &m)| a - m).collect();
        let lhs = s - dot(xi, &s_z1) + y.quad_form(&c);
        residual = residual.max(inst.costs[i] - lhs);
    }

    let p = &master.worst_case.p;
    let feasible = match &interior {
        Some(q) => restore(inst, p, q),
        None if contains_dy(inst, p, T::tol_floor()) => p.clone(),
        None => return Err(slater_violated()),
    };
    Ok(DyCertificate {
        s,
        u,
        z: std::iter::once(z0).chain(z1).collect(),
        y,
        value,
        y_min_eigenvalue,
        primal_lower: dot(&feasible, &inst.costs),
        slater: interior.is_some(),
        residual,
    })
}

pub fn dual_value_dy<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<DyCertificate<T>> {
    dy_certificate(&spec.dy_instance(x)?)
}

fn frobenius_inner<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> T {
    let mut total = T::zero();
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            total += a[(i, j)] * b[(i, j)];
        }
    }
    total
}

/// Closest point to `p` on the segment towards `interior` that satisfies
/// both constraints exactly.
fn restore<T: Real>(inst: &DyInstance<T>, p: &[T], interior: &[T]) -> Vec<T> {
    let at = |theta: T| -> Vec<T> {
        p.iter()
            .zip(interior)
            .map(|(&a, &b)| a + theta * (b - a))
            .collect()
    };
    if contains_dy(inst, p, T::tol_floor()) {
        return p.to_vec();
    }
    let (mut lo, mut hi) = (T::zero(), T::one());
    for _ in 0..100 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if contains_dy(inst, &at(mid), T::tol_floor()) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    at(hi)
}
