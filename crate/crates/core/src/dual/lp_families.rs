use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::lp::{LinearProgram, LpSolution, LpStatus, RowKind, Sense};
use crate::model::{KsInstance, ProblemSpec, SmInstance, WInstance};
use crate::scalar::{dot, Real};

use crate::inner::{ks_lp, sm_lp, SmRowSide};

/// Dual of the moment LP.
///
/// `min αᵀl + βᵀu + γᵀp_lower + μᵀp_upper` subject to
/// `(α + β)ᵀf(ξᵏ) + γ_k + μ_k ≥ h_k`, with `α ≤ 0` on the lower moment
/// bounds, `β ≥ 0` on the upper ones, `γ ≤ 0` and `μ ≥ 0`. Moment 0 is the
/// normalization row. An equality row's free multiplier is split into its
/// negative part (`α`) and positive part (`β`).
#[derive(Debug, Clone, Serialize)]
pub struct SmCertificate<T> {
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
    pub gamma: Vec<T>,
    pub mu: Vec<T>,
    pub value: T,
    pub residual: T,
}

/// Dual of the transport LP in explicit form.
///
/// `min −Σ ref_j β_j − radius·γ + η` subject to `α_i + η − μ_i = h_i` and
/// `−α_i − β_j − dist_ij γ − λ_ij = 0`, with `α, β, η` free, `γ ≤ 0` and
/// the surpluses `μ, λ ≥ 0`.
#[derive(Debug, Clone, Serialize)]
pub struct WCertificate<T> {
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
    pub gamma: T,
    pub eta: T,
    pub mu: Vec<T>,
    pub lambda: Matrix<T>,
    pub value: T,
    pub residual: T,
}

/// Dual of the CDF-band LP.
///
/// `λ` is the normalization multiplier. For the `k`-th prefix, `α_k ≤ 0`
/// prices the lower band and `β_k ≥ 0` the upper band. The constraint for
/// scenario `i` at prefix position `pos(i)` is
/// `λ + Σ_{k ≥ pos(i)} (α_k + β_k) − γ_i = h_i` with surplus `γ_i ≥ 0`, and
/// the value is `λ + Σ_k (α_k + β_k) c_k + Σ_k (β_k − α_k) radius`, where
/// `c_k` is the reference prefix sum.
///
/// `printed_value` evaluates the alternative objective
/// `λ + Σ_k (α_k + β_k) + Σ_k (α_k − β_k) radius` at the same multipliers;
/// `printed_matches` records whether it agrees with `value`.
#[derive(Debug, Clone, Serialize)]
pub struct KsCertificate<T> {
    pub lambda: T,
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
    pub gamma: Vec<T>,
    pub value: T,
    pub printed_value: T,
    pub printed_matches: bool,
    pub residual: T,
}

/// `m·b`, treating a zero multiplier on an infinite bound as zero.
fn priced<T: Real>(m: T, b: T) -> T {
    if m == T::zero() {
        T::zero()
    } else {
        m * b
    }
}

fn positive<T: Real>(v: T) -> T {
    v.max(T::zero())
}

fn solve_dual_lp<T: Real>(lp: &LinearProgram<T>, what: &str) -> Result<LpSolution<T>> {
    let sol = lp.solve()?;
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        // The primal objective is bounded on the simplex, so an unbounded
        // dual means the primal has no feasible point.
        LpStatus::Unbounded => Err(Error::AmbiguityEmpty {
            x: Vec::new(),
            detail: format!("{what} dual is unbounded"),
        }),
        status => Err(Error::Invalid(format!("{what} dual reported {status:?}"))),
    }
}

fn located<T: Real>(e: Error, x: &[T]) -> Error {
    match e {
        Error::AmbiguityEmpty { x: at, detail } if at.is_empty() => Error::AmbiguityEmpty {
            x: x.iter().map(|v| v.as_f64()).collect(),
            detail,
        },
        other => other,
    }
}

pub fn sm_certificate<T: Real>(inst: &SmInstance<T>) -> Result<SmCertificate<T>> {
    let n = inst.costs.len();
    let m = inst.moments.len();
    let (primal, map) = sm_lp(inst);
    let dual = primal.dual();
    let sol = solve_dual_lp(&dual.lp, "moment")?;
    let y = &sol.x;

    let mut alpha = vec![T::zero(); m];
    let mut beta = vec![T::zero(); m];
    for (k, row) in map.iter().enumerate() {
        match row.side {
            SmRowSide::Lower => alpha[row.moment] = y[k],
            SmRowSide::Upper => beta[row.moment] = y[k],
            SmRowSide::Both => {
                alpha[row.moment] = y[k].min(T::zero());
                beta[row.moment] = y[k].max(T::zero());
            }
        }
    }
    let mut gamma = vec![T::zero(); n];
    let mut mu = vec![T::zero(); n];
    for (k, br) in dual.bound_rows.iter().enumerate() {
        let v = y[dual.primal_rows + k];
        if br.kind == RowKind::Ge {
            gamma[br.var] = v;
        } else {
            mu[br.var] = v;
        }
    }

    let mut value = T::zero();
    for r in 0..m {
        value += priced(alpha[r], inst.lower[r]) + priced(beta[r], inst.upper[r]);
    }
    for k in 0..n {
        value += priced(gamma[k], inst.p_lower[k].max(T::zero()))
            + priced(mu[k], inst.p_upper[k]);
    }

    let mut residual = T::zero();
    for k in 0..n {
        let lhs: T = (0..m)
            .map(|r| (alpha[r] + beta[r]) * inst.moments[r][k])
            .sum::<T>()
            + gamma[k]
            + mu[k];
        residual = residual.max(inst.costs[k] - lhs);
        residual = residual.max(positive(gamma[k])).max(positive(-mu[k]));
    }
    for r in 0..m {
        residual = residual.max(positive(alpha[r])).max(positive(-beta[r]));
    }
    Ok(SmCertificate {
        alpha,
        beta,
        gamma,
        mu,
        value,
        residual,
    })
}

pub fn dual_value_sm<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<SmCertificate<T>> {
    let inst = spec.sm_instance(x)?;
    sm_certificate(&inst).map_err(|e| located(e, x))
}

/// Explicit transport dual; variables are `α (N)`, `β (N)`, `γ`, `η`.
fn w_dual_lp<T: Real>(inst: &WInstance<T>) -> LinearProgram<T> {
    let n = inst.costs.len();
    let (gamma, eta) = (2 * n, 2 * n + 1);
    let mut cost = vec![T::zero(); 2 * n + 2];
    for j in 0..n {
        cost[n + j] = -inst.reference[j];
    }
    cost[gamma] = -inst.radius;
    cost[eta] = T::one();
    let mut lp = LinearProgram::new(Sense::Minimize, cost);
    for j in 0..2 * n + 2 {
        lp.set_bounds(j, T::neg_infinity(), T::infinity());
    }
    lp.set_bounds(gamma, T::neg_infinity(), T::zero());
    for i in 0..n {
        lp.add_sparse_row(&[(i, T::one()), (eta, T::one())], RowKind::Ge, inst.costs[i]);
    }
    for i in 0..n {
        for j in 0..n {
            lp.add_sparse_row(
                &[(i, -T::one()), (n + j, -T::one()), (gamma, -inst.dist[(i, j)])],
                RowKind::Ge,
                T::zero(),
            );
        }
    }
    lp
}

pub fn w_certificate<T: Real>(inst: &WInstance<T>) -> Result<WCertificate<T>> {
    if inst.radius < T::zero() {
        return Err(Error::param("radius", inst.radius.as_f64(), "must be nonnegative"));
    }
    let n = inst.costs.len();
    let lp = w_dual_lp(inst);
    let sol = solve_dual_lp(&lp, "transport")?;
    let v = &sol.x;
    let alpha = v[..n].to_vec();
    let beta = v[n..2 * n].to_vec();
    let (gamma, eta) = (v[2 * n], v[2 * n + 1]);
    let mu: Vec<T> = (0..n).map(|i| alpha[i] + eta - inst.costs[i]).collect();
    let mut lambda = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            lambda[(i, j)] = -alpha[i] - beta[j] - inst.dist[(i, j)] * gamma;
        }
    }
    let value = -dot(&inst.reference, &beta) - inst.radius * gamma + eta;
    let mut residual = positive(gamma);
    for i in 0..n {
        residual = residual.max(positive(-mu[i]));
        for j in 0..n {
            residual = residual.max(positive(-lambda[(i, j)]));
        }
    }
    Ok(WCertificate {
        alpha,
        beta,
        gamma,
        eta,
        mu,
        lambda,
        value,
        residual,
    })
}

pub fn dual_value_w<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<WCertificate<T>> {
    w_certificate(&spec.w_instance(x)?)
}

pub fn ks_certificate<T: Real>(inst: &KsInstance<T>) -> Result<KsCertificate<T>> {
    if inst.radius < T::zero() {
        return Err(Error::param("radius", inst.radius.as_f64(), "must be nonnegative"));
    }
    let n = inst.costs.len();
    let dual = ks_lp(inst).dual();
    let sol = solve_dual_lp(&dual.lp, "CDF-band")?;
    let y = &sol.x;
    let lambda = y[0];
    let beta: Vec<T> = (0..n).map(|k| y[1 + 2 * k]).collect();
    let alpha: Vec<T> = (0..n).map(|k| y[2 + 2 * k]).collect();

    let mut gamma = vec![T::zero(); n];
    let mut tail = T::zero();
    for (pos, &i) in inst.order.iter().enumerate().rev() {
        tail += alpha[pos] + beta[pos];
        gamma[i] = lambda + tail - inst.costs[i];
    }

    let mut value = lambda;
    let mut printed_value = lambda;
    let mut cum = T::zero();
    let total: T = inst.reference.iter().copied().sum();
    for (pos, &i) in inst.order.iter().enumerate() {
        cum += inst.reference[i];
        let (a, b) = (alpha[pos], beta[pos]);
        value += (a + b) * cum + (b - a) * inst.radius;
        printed_value += (a + b) * total + (a - b) * inst.radius;
    }
    let printed_matches =
        (printed_value - value).abs() <= T::tol(super::LP_GAP_TOL) * (T::one() + value.abs());

    let mut residual = T::zero();
    for k in 0..n {
        residual = residual
            .max(positive(alpha[k]))
            .max(positive(-beta[k]))
            .max(positive(-gamma[k]));
    }
    Ok(KsCertificate {
        lambda,
        alpha,
        beta,
        gamma,
        value,
        printed_value,
        printed_matches,
        residual,
    })
}

pub fn dual_value_ks<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<KsCertificate<T>> {
    ks_certificate(&spec.ks_instance(x)?)
}
