use crate::dual::simplex_argmax;
use crate::error::{Error, Result};
use crate::model::{PhiInstance, ProblemSpec};
use crate::scalar::{dot, Real};

use super::{AffineFn, IndexPoint, IndexSet, SipProblem};

/// Semi-infinite form of the divergence-ball dual.
///
/// Master variables are `(z, α, β, λ_1..λ_N)`, the objective is `z`, and
/// for every `p` in the simplex
/// `hᵀp + α(D(p) − radius) + β(Σp − 1) + λᵀp − z ≤ 0` with `α ≤ 0` and
/// `λ ≥ 0`. Separation is exact: for fixed multipliers the maximizer over
/// the simplex has a closed form up to one normalization multiplier.
///
/// The box on `α` is the one the Lagrangian dual uses; `β` and `λ` enter
/// every cut with coefficients that vanish or only hurt on the simplex, so
/// their boxes are nominal.
pub fn build_phi_sip<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<SipProblem<'static, T>> {
    let inst = spec.phi_instance(x)?;
    if inst.radius <= T::zero() {
        return Err(Error::param(
            "radius",
            inst.radius.as_f64(),
            "the semi-infinite form needs a positive radius",
        ));
    }
    let n = inst.costs.len();
    let h_max = inst.costs.iter().copied().fold(T::neg_infinity(), T::max);
    let h_min = inst.costs.iter().copied().fold(T::infinity(), T::min);
    let nominal = dot(&inst.reference, &inst.costs);
    let alpha_max = T::lit(2.0) * (h_max - nominal) / inst.radius + T::one();
    let spread = h_max - h_min + T::one();

    let mut cost = vec![T::zero(); n + 3];
    cost[0] = T::one();
    let mut lower = vec![T::zero(); n + 3];
    let mut upper = vec![spread; n + 3];
    (lower[0], upper[0]) = (h_min - T::one(), h_max + T::one());
    (lower[1], upper[1]) = (-alpha_max, T::zero());
    (lower[2], upper[2]) = (-spread, spread);

    let row_inst = inst.clone();
    let row = move |t: &IndexPoint<T>| -> Result<(Vec<T>, T)> {
        let p = &t.s;
        let mut a = Vec::with_capacity(n + 3);
        a.push(-T::one());
        a.push(row_inst.phi.divergence(p, &row_inst.reference) - row_inst.radius);
        a.push(p.iter().copied().sum::<T>() - T::one());
        a.extend_from_slice(p);
        Ok((a, dot(&row_inst.costs, p)))
    };
    let oracle = move |m: &[T]| -> Result<IndexPoint<T>> {
        let shifted = PhiInstance {
            costs: (0..n).map(|i| inst.costs[i] + m[2] + m[3 + i]).collect(),
            ..inst.clone()
        };
        Ok(IndexPoint::new(simplex_argmax(&shifted, -m[1]), 0))
    };
    Ok(SipProblem::new(
        cost,
        lower,
        upper,
        Box::new(AffineFn::new(n + 3, row)),
        IndexSet::Box {
            lower: vec![T::zero(); n],
            upper: vec![T::one(); n],
            tags: 1,
            seeds: Vec::new(),
        },
    )
    .with_oracle(Box::new(oracle)))
}
