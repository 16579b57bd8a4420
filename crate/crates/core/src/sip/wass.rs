use crate::error::{Error, Result};
use crate::model::{AmbiguitySpec, ProblemSpec};
use crate::scalar::Real;

use super::{run_sip, separation_max, AffineFn, GridOptions, IndexPoint, IndexSet, SipProblem, SipState};

/// Semi-infinite form of the continuous-support Wasserstein worst case.
///
/// Master variables are `v_0..v_{N-1}` and the transport price
/// `v_N ≥ 0`; the objective is `(1/N) Σ v_i + radius·v_N` and the
/// constraints are `h(x, s) − v_i − v_N·d(s, ξⁱ) ≤ 0` for every `s` in the
/// support box and every sample `i`.
///
/// The samples themselves are separation seeds. Master bounds are derived
/// from a scan of `h` over the box: `v_i ≥ h(x, ξⁱ)` at any solution, and
/// with a positive radius the price cannot exceed
/// `(max h − mean h) / radius` at an optimum.
pub fn build_wass_cont<'a, T: Real>(spec: &'a ProblemSpec, x: &[T]) -> Result<SipProblem<'a, T>> {
    let AmbiguitySpec::Wc(wc) = &spec.ambiguity else {
        return Err(Error::Unsupported {
            family: spec.family().to_string(),
            operation: "the continuous Wasserstein reformulation".into(),
        });
    };
    let (radius, support) = spec.continuous_params(x)?;
    for (k, p) in spec.scenarios.points.iter().enumerate() {
        if !support.contains(p) {
            return Err(Error::Invalid(format!("sample {k} lies outside the support box")));
        }
    }
    let n = spec.num_scenarios();
    let samples: Vec<Vec<T>> = (0..n).map(|k| spec.point(k)).collect();
    let lower: Vec<T> = support.lower.iter().map(|&v| T::lit(v)).collect();
    let upper: Vec<T> = support.upper.iter().map(|&v| T::lit(v)).collect();
    let x = x.to_vec();
    let norm = wc.norm;

    let at_samples = spec.costs(&x)?;
    let scan = separation_max(
        |s: &[T], _| spec.cost_at(&x, s),
        &lower,
        &upper,
        1,
        &GridOptions::default(),
    )?;
    let h_min = at_samples.iter().copied().fold(T::infinity(), T::min);
    let h_max = at_samples.iter().copied().fold(scan.value, T::max);
    let mean = at_samples.iter().copied().sum::<T>() / T::count(n);
    let range = h_max - h_min;
    let v_lo = h_min - range - T::one();
    let v_hi = h_max + range + T::one();
    let price_hi = if radius > T::zero() {
        (v_hi - mean) / radius + T::one()
    } else {
        T::lit(1e6) * (T::one() + range)
    };

    let mut cost = vec![T::one() / T::count(n); n + 1];
    cost[n] = radius;
    let mut lo = vec![v_lo; n + 1];
    let mut hi = vec![v_hi; n + 1];
    lo[n] = T::zero();
    hi[n] = price_hi;

    let seeds = samples
        .iter()
        .enumerate()
        .map(|(i, s)| IndexPoint::new(s.clone(), i))
        .collect();
    let row = move |t: &IndexPoint<T>| -> Result<(Vec<T>, T)> {
        let mut a = vec![T::zero(); n + 1];
        a[t.tag] = -T::one();
        a[n] = -norm.distance(&t.s, &samples[t.tag]);
        Ok((a, spec.cost_at(&x, &t.s)?))
    };
    Ok(SipProblem::new(
        cost,
        lo,
        hi,
        Box::new(AffineFn::new(n + 1, row)),
        IndexSet::Box {
            lower,
            upper,
            tags: n,
            seeds,
        },
    ))
}

/// Worst-case expectation over the continuous Wasserstein ball at `x`.
pub fn wass_cont_value<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<(T, SipState<T>)> {
    let problem = build_wass_cont(spec, x)?;
    let state = run_sip(&problem)?;
    if !state.converged {
        return Err(Error::NonTermination {
            iterations: state.iteration,
            violation: state.last_violation().as_f64(),
        });
    }
    Ok((state.value(), state))
}
