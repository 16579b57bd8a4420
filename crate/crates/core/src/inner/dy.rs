use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::lp::{LinearProgram, LpStatus, RowKind, Sense};
use crate::model::{DyInstance, Family};
use crate::scalar::{dot, Real};

use super::{WorstCase, MAX_CUTS, MEMBERSHIP_TOL};

/// A row of the cutting-plane master besides the simplex row.
#[derive(Debug, Clone)]
pub enum DyCut<T> {
    /// `Σ p_i dirᵀS(ξⁱ − mean) ≤ √alpha` for a unit `dir`, where `S` is the
    /// inverse square root of `cov`.
    Ellipsoid(Vec<T>),
    /// `Σ p_i (vᵀ(ξⁱ − mean))² ≤ beta·vᵀ cov v` for a unit `v`.
    Eigen(Vec<T>),
}

/// Final state of the cutting-plane loop, kept for dual recovery.
#[derive(Debug, Clone)]
pub struct DyMaster<T> {
    pub worst_case: WorstCase<T>,
    /// Cuts in master row order (row 0 is `Σ p = 1`).
    pub cuts: Vec<DyCut<T>>,
    /// Master row multipliers, row 0 first.
    pub duals: Vec<T>,
    /// Inverse square root of `cov`.
    pub inv_sqrt: Matrix<T>,
    /// Largest violation of either constraint at the returned `p`.
    pub violation: T,
}

struct Geometry<T> {
    centered: Vec<Vec<T>>,
    /// `S(ξⁱ − mean)` per scenario.
    whitened: Vec<Vec<T>>,
    inv_sqrt: Matrix<T>,
    sqrt_alpha: T,
}

impl<T: Real> Geometry<T> {
    fn new(inst: &DyInstance<T>) -> Self {
        let eig = symmetric_eigen(&inst.cov);
        let inv_sqrt = eig.map_values(|v| T::one() / v.sqrt());
        let centered: Vec<Vec<T>> = inst
            .points
            .iter()
            .map(|p| p.iter().zip(&inst.mean).map(|(&a, &m)| a - m).collect())
            .collect();
        let whitened = centered.iter().map(|c| inv_sqrt.mul_vec(c)).collect();
        Self {
            centered,
            whitened,
            inv_sqrt,
            sqrt_alpha: inst.alpha.sqrt(),
        }
    }

    /// `S(Σ p ξ − mean)`.
    fn whitened_mean(&self, p: &[T]) -> Vec<T> {
        let d = self.inv_sqrt.rows();
        let mut z = vec![T::zero(); d];
        for (pi, w) in p.iter().zip(&self.whitened) {
            for k in 0..d {
                z[k] += *pi * w[k];
            }
        }
        z
    }

    /// `beta·cov − Σ p_i (ξⁱ − mean)(ξⁱ − mean)ᵀ`.
    fn moment_gap(&self, inst: &DyInstance<T>, p: &[T]) -> Matrix<T> {
        let mut m = inst.cov.scale(inst.beta);
        let d = m.rows();
        for (pi, c) in p.iter().zip(&self.centered) {
            for a in 0..d {
                for b in 0..d {
                    m[(a, b)] -= *pi * c[a] * c[b];
                }
            }
        }
        m
    }

    fn ellipsoid_row(&self, dir: &[T]) -> Vec<T> {
        self.whitened.iter().map(|w| dot(dir, w)).collect()
    }

    fn eigen_row(&self, v: &[T]) -> Vec<T> {
        self.centered
            .iter()
            .map(|c| {
                let t = dot(v, c);
                t * t
            })
            .collect()
    }

    /// Ellipsoid slack `√alpha − ‖z‖` with the unit direction of `z`.
    fn ellipsoid_slack(&self, p: &[T]) -> (T, Option<Vec<T>>) {
        let z = self.whitened_mean(p);
        let norm = dot(&z, &z).sqrt();
        let dir = (norm > T::zero()).then(|| z.iter().map(|&v| v / norm).collect());
        (self.sqrt_alpha - norm, dir)
    }

    /// Smallest eigenvalue of the moment gap and its eigenvector.
    fn lmi_slack(&self, inst: &DyInstance<T>, p: &[T]) -> (T, Vec<T>) {
        let eig = symmetric_eigen(&self.moment_gap(inst, p));
        (eig.min_value(), eig.vector(0))
    }
}

/// Worst case over the ellipsoidal-mean, bounded-second-moment set by
/// cutting planes on the simplex.
///
/// Each round adds a tangent plane of the mean ellipsoid at the direction of
/// the current whitened mean and, when the moment bound fails, the row
/// `vᵀ(beta·cov − Σ p_i A_i)v ≥ 0` at the most negative eigenvector `v`. The
/// loop stops when both violations are within `1e-7`.
pub fn solve_dy<T: Real>(inst: &DyInstance<T>) -> Result<DyMaster<T>> {
    let n = inst.costs.len();
    let geo = Geometry::new(inst);
    let mut master = LinearProgram::new(Sense::Maximize, inst.costs.clone());
    master.add_row(vec![T::one(); n], RowKind::Eq, T::one());
    let mut cuts = Vec::new();
    let ell_tol = T::tol(MEMBERSHIP_TOL) * (T::one() + geo.sqrt_alpha);
    let lmi_tol = T::tol(MEMBERSHIP_TOL) * (T::one() + inst.beta * inst.cov.max_abs());

    loop {
        let sol = master.solve()?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Invalid(format!("ellipsoid master reported {:?}", sol.status)));
        }
        let (ell, dir) = geo.ellipsoid_slack(&sol.x);
        let (lmi, v) = geo.lmi_slack(inst, &sol.x);
        let violation = (-ell).max(-lmi).max(T::zero());
        if -ell <= ell_tol && -lmi <= lmi_tol {
            let mut active = Vec::new();
            if ell <= ell_tol {
                active.push("mean ellipsoid".to_string());
            }
            if lmi <= lmi_tol {
                active.push("second-moment bound".to_string());
            }
            return Ok(DyMaster {
                worst_case: WorstCase {
                    family: Family::Dy,
                    value: sol.objective,
                    p: sol.x,
                    active,
                    plan: None,
                    iterations: cuts.len(),
                },
                cuts,
                duals: sol.duals,
                inv_sqrt: geo.inv_sqrt,
                violation,
            });
        }
        if cuts.len() >= MAX_CUTS {
            return Err(Error::Tolerance {
                what: "ellipsoid cutting planes".into(),
                iterations: cuts.len(),
                lower: f64::NEG_INFINITY,
                upper: sol.objective.as_f64(),
            });
        }
        if -ell > ell_tol {
            let dir = dir.expect("positive violation implies a nonzero mean offset");
            master.add_row(geo.ellipsoid_row(&dir), RowKind::Le, geo.sqrt_alpha);
            cuts.push(DyCut::Ellipsoid(dir));
        }
        if -lmi > lmi_tol {
            master.add_row(geo.eigen_row(&v), RowKind::Le, inst.beta * inst.cov.quad_form(&v));
            cuts.push(DyCut::Eigen(v));
        }
    }
}

/// Searches for a distribution strictly inside both constraints.
///
/// Maximizes a common slack `s ≤ 1` over cutting-plane relaxations. Returns
/// the point and its certified slack, or `None` when the relaxation shows
/// no positive slack is possible.
pub fn slater_point<T: Real>(inst: &DyInstance<T>) -> Result<Option<(Vec<T>, T)>> {
    let n = inst.costs.len();
    let geo = Geometry::new(inst);
    let mut cost = vec![T::zero(); n];
    cost.push(T::one());
    let mut master = LinearProgram::new(Sense::Maximize, cost);
    master.set_bounds(n, T::neg_infinity(), T::one());
    let mut simplex = vec![T::one(); n];
    simplex.push(T::zero());
    master.add_row(simplex, RowKind::Eq, T::one());
    let floor = T::tol(1e-9);

    for _ in 0..=MAX_CUTS {
        let sol = master.solve()?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Invalid(format!("Slater master reported {:?}", sol.status)));
        }
        let s_up = sol.x[n];
        if s_up <= floor {
            return Ok(None);
        }
        let p = &sol.x[..n];
        let (ell, dir) = geo.ellipsoid_slack(p);
        let (lmi, v) = geo.lmi_slack(inst, p);
        let s_true = ell.min(lmi);
        let half = s_up / T::lit(2.0);
        if s_true >= half {
            return Ok(Some((p.to_vec(), s_true)));
        }
        if ell < half {
            // At the exact centre any direction gives a valid cut.
            let dir = dir.unwrap_or_else(|| {
                let mut e = vec![T::zero(); inst.mean.len()];
                e[0] = T::one();
                e
            });
            let mut row = geo.ellipsoid_row(&dir);
            row.push(T::one());
            master.add_row(row, RowKind::Le, geo.sqrt_alpha);
        }
        if lmi < half {
            let mut row = geo.eigen_row(&v);
            row.push(T::one());
            master.add_row(row, RowKind::Le, inst.beta * inst.cov.quad_form(&v));
        }
    }
    Err(Error::Tolerance {
        what: "Slater search".into(),
        iterations: MAX_CUTS,
        lower: 0.0,
        upper: f64::NAN,
    })
}
