//! Numeric inner problems at a fixed decision.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::Real;

use super::{param, AmbiguitySpec, Norm, PhiKind, ProblemSpec, SupportBox};

/// Moment-bounded set: `lower ≤ Σ_k p_k moments[r][k] ≤ upper` per row and
/// `p_lower ≤ p ≤ p_upper`. Row 0 is normalization.
#[derive(Debug, Clone, Serialize)]
pub struct SmInstance<T> {
    pub costs: Vec<T>,
    pub moments: Vec<Vec<T>>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub p_lower: Vec<T>,
    pub p_upper: Vec<T>,
}

/// Mean ellipsoid and second-moment bound:
/// `(m − mean)ᵀ cov⁻¹ (m − mean) ≤ alpha` with `m = Σ p_k ξᵏ`, and
/// `Σ p_k (ξᵏ − mean)(ξᵏ − mean)ᵀ ⪯ beta·cov`.
#[derive(Debug, Clone, Serialize)]
pub struct DyInstance<T> {
    pub costs: Vec<T>,
    pub points: Vec<Vec<T>>,
    pub mean: Vec<T>,
    pub cov: Matrix<T>,
    pub alpha: T,
    pub beta: T,
}

/// Transport ball around `reference` with pairwise distances `dist`.
#[derive(Debug, Clone, Serialize)]
pub struct WInstance<T> {
    pub costs: Vec<T>,
    pub reference: Vec<T>,
    pub dist: Matrix<T>,
    pub radius: T,
}

/// Divergence ball `Σ ref_i φ(p_i / ref_i) ≤ radius`.
#[derive(Debug, Clone, Serialize)]
pub struct PhiInstance<T> {
    pub costs: Vec<T>,
    pub reference: Vec<T>,
    pub radius: T,
    pub phi: PhiKind,
}

/// CDF band: `|Σ_{j ≤ k} (p − ref)_{order[j]}| ≤ radius` for every `k`.
#[derive(Debug, Clone, Serialize)]
pub struct KsInstance<T> {
    pub costs: Vec<T>,
    pub reference: Vec<T>,
    pub order: Vec<usize>,
    pub radius: T,
}

fn nonnegative<T: Real>(name: &str, v: T) -> Result<T> {
    if v < T::zero() {
        return Err(Error::InvalidParameter {
            name: name.into(),
            value: v.as_f64(),
            reason: "must be nonnegative".into(),
        });
    }
    Ok(v)
}

fn wrong_family(spec: &ProblemSpec, wanted: &str) -> Error {
    Error::Unsupported {
        family: spec.family().to_string(),
        operation: format!("the {wanted} inner problem"),
    }
}

impl ProblemSpec {
    fn reference<T: Real>(&self) -> Vec<T> {
        self.scenarios.reference().into_iter().map(T::lit).collect()
    }

    fn points<T: Real>(&self) -> Vec<Vec<T>> {
        (0..self.num_scenarios()).map(|k| self.point(k)).collect()
    }

    pub fn sm_instance<T: Real>(&self, x: &[T]) -> Result<SmInstance<T>> {
        let AmbiguitySpec::Sm(sm) = &self.ambiguity else {
            return Err(wrong_family(self, "sm"));
        };
        self.check_decision(x)?;
        let n = self.num_scenarios();
        let costs = self.costs(x)?;
        let mut moments = vec![vec![T::one(); n]];
        let mut lower = vec![T::one()];
        let mut upper = vec![T::one()];
        for (r, row) in sm.moments.iter().enumerate() {
            let mut values = Vec::with_capacity(n);
            for k in 0..n {
                let v = row
                    .f
                    .eval(x, Some(&self.point::<T>(k)))
                    .map_err(|source| Error::Parameter {
                        name: format!("moment {} function", r + 1),
                        source,
                    })?;
                values.push(v);
            }
            moments.push(values);
            lower.push(param(&row.lower, &format!("moment {} lower", r + 1), x)?);
            upper.push(param(&row.upper, &format!("moment {} upper", r + 1), x)?);
        }
        let bounds = |list: &Option<Vec<_>>, name: &str, default: T| -> Result<Vec<T>> {
            match list {
                None => Ok(vec![default; n]),
                Some(es) => es
                    .iter()
                    .enumerate()
                    .map(|(k, e)| param(e, &format!("{name}[{k}]"), x))
                    .collect(),
            }
        };
        let p_lower = bounds(&sm.p_lower, "p_lower", T::zero())?;
        let p_upper = bounds(&sm.p_upper, "p_upper", T::one())?;
        if let Some(k) = (0..n).find(|&k| p_lower[k] > p_upper[k]) {
            return Err(Error::AmbiguityEmpty {
                x: x.iter().map(|v| v.as_f64()).collect(),
                detail: format!("probability bounds cross at scenario {k}"),
            });
        }
        Ok(SmInstance {
            costs,
            moments,
            lower,
            upper,
            p_lower,
            p_upper,
        })
    }

    pub fn dy_instance<T: Real>(&self, x: &[T]) -> Result<DyInstance<T>> {
        let AmbiguitySpec::Dy(dy) = &self.ambiguity else {
            return Err(wrong_family(self, "dy"));
        };
        self.check_decision(x)?;
        let d = self.scenario_dim();
        let mean = dy
            .mean
            .iter()
            .enumerate()
            .map(|(k, e)| param(e, &format!("mean[{k}]"), x))
            .collect::<Result<Vec<T>>>()?;
        let mut cov = Matrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = param(&dy.cov[i][j], &format!("cov[{i}][{j}]"), x)?;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        let min_eig = symmetric_eigen(&cov).min_value();
        if min_eig <= T::zero() {
            return Err(Error::InvalidParameter {
                name: "cov".into(),
                value: min_eig.as_f64(),
                reason: "must be positive definite (smallest eigenvalue shown)".into(),
            });
        }
        Ok(DyInstance {
            costs: self.costs(x)?,
            points: self.points(),
            mean,
            cov,
            alpha: nonnegative("alpha", param(&dy.alpha, "alpha", x)?)?,
            beta: nonnegative("beta", param(&dy.beta, "beta", x)?)?,
        })
    }

    pub fn w_instance<T: Real>(&self, x: &[T]) -> Result<WInstance<T>> {
        let AmbiguitySpec::W(w) = &self.ambiguity else {
            return Err(wrong_family(self, "w"));
        };
        self.check_decision(x)?;
        let radius = nonnegative("radius", param(&w.radius, "radius", x)?)?;
        Ok(WInstance {
            costs: self.costs(x)?,
            reference: self.reference(),
            dist: distance_matrix(&self.points(), w.norm),
            radius,
        })
    }

    pub fn phi_instance<T: Real>(&self, x: &[T]) -> Result<PhiInstance<T>> {
        let AmbiguitySpec::Phi(phi) = &self.ambiguity else {
            return Err(wrong_family(self, "phi"));
        };
        self.check_decision(x)?;
        let reference: Vec<T> = self.reference();
        if phi.phi == PhiKind::Kl {
            if let Some(k) = reference.iter().position(|&r| r <= T::zero()) {
                return Err(Error::InvalidParameter {
                    name: format!("weights[{k}]"),
                    value: 0.0,
                    reason: "reference weights must be positive under KL".into(),
                });
            }
        }
        let radius = nonnegative("radius", param(&phi.radius, "radius", x)?)?;
        Ok(PhiInstance {
            costs: self.costs(x)?,
            reference,
            radius,
            phi: phi.phi,
        })
    }

    pub fn ks_instance<T: Real>(&self, x: &[T]) -> Result<KsInstance<T>> {
        let AmbiguitySpec::Ks(ks) = &self.ambiguity else {
            return Err(wrong_family(self, "ks"));
        };
        self.check_decision(x)?;
        let radius = nonnegative("radius", param(&ks.radius, "radius", x)?)?;
        Ok(KsInstance {
            costs: self.costs(x)?,
            reference: self.reference(),
            order: self.ks_order(),
            radius,
        })
    }

    /// Radius and support box of a continuous-support family at `x`.
    pub fn continuous_params<T: Real>(&self, x: &[T]) -> Result<(T, &SupportBox)> {
        let (radius, support) = match &self.ambiguity {
            AmbiguitySpec::Wc(wc) => (&wc.radius, &wc.support),
            AmbiguitySpec::Ksc(ksc) => (&ksc.radius, &ksc.support),
            _ => return Err(wrong_family(self, "continuous-support")),
        };
        self.check_decision(x)?;
        Ok((nonnegative("radius", param(radius, "radius", x)?)?, support))
    }

    /// Scenario order used by the KS family.
    pub fn ks_order(&self) -> Vec<usize> {
        match &self.ambiguity {
            AmbiguitySpec::Ks(ks) if ks.order.is_some() => ks.order.clone().unwrap(),
            _ => self.scenarios.lexicographic_order(),
        }
    }
}

/// Pairwise distances between scenarios under `norm`.
pub fn distance_matrix<T: Real>(points: &[Vec<T>], norm: Norm) -> Matrix<T> {
    let n = points.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = norm.distance(&points[i], &points[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}
