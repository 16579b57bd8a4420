//! Outer minimization of `F(x) = f(x) + Φ(x)` over the decision box.
//!
//! Every candidate `x` gets its ambiguity parameters and costs rebuilt from
//! the spec, so decision dependence needs no special handling. The search
//! is a multistart coordinate pattern search: derivative free, since `Φ` is
//! only piecewise smooth, and heuristic as a global method.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::dual::{dual_value, validate_duality, DualCertificate, GapReport};
use crate::error::{Error, Result};
use crate::inner::{worst_case, WorstCase};
use crate::model::{Family, ProblemSpec};
use crate::scalar::Real;
use crate::sip::{ks_cont_value, wass_cont_value, KsContSolution, SipState};

/// Worst-case value at a fixed decision, with the family-specific detail.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InnerResult<T> {
    Finite(WorstCase<T>),
    /// Continuous Wasserstein, via the cutting-surface loop.
    Sip(SipState<T>),
    /// Continuous CDF ball, via the cell program.
    Cells(KsContSolution<T>),
}

/// `Φ(x)` for any family.
pub fn worst_case_value<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<(T, InnerResult<T>)> {
    match spec.family() {
        Family::Wc => {
            let (v, state) = wass_cont_value(spec, x)?;
            Ok((v, InnerResult::Sip(state)))
        }
        Family::Ksc => {
            let (v, _, sol) = ks_cont_value(spec, x)?;
            Ok((v, InnerResult::Cells(sol)))
        }
        _ => {
            let wc = worst_case(spec, x)?;
            Ok((wc.value, InnerResult::Finite(wc)))
        }
    }
}

/// `F(x) = f(x) + Φ(x)`.
pub fn objective_value<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<T> {
    spec.check_decision(x)?;
    Ok(spec.objective_at(x)? + worst_case_value(spec, x)?.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct Evaluation<T> {
    /// `F(x)`.
    pub value: T,
    /// First-stage cost `f(x)`.
    pub first_stage: T,
    /// `Φ(x)`.
    pub worst_case: T,
    pub inner: InnerResult<T>,
    /// Dual certificate for the finite-support families.
    pub certificate: Option<DualCertificate<T>>,
    pub gap: Option<GapReport>,
}

/// Evaluates `F` at `x` with both the primal and the dual inner solve.
pub fn evaluate<T: Real>(spec: &ProblemSpec, x: &[T]) -> Result<Evaluation<T>> {
    spec.check_decision(x)?;
    let first_stage = spec.objective_at(x)?;
    let (phi, inner) = worst_case_value(spec, x)?;
    let (certificate, gap) = if spec.family().is_finite_support() {
        (
            Some(dual_value(spec, x)?),
            Some(validate_duality(spec, x, spec.family())?),
        )
    } else {
        (None, None)
    };
    Ok(Evaluation {
        value: first_stage + phi,
        first_stage,
        worst_case: phi,
        inner,
        certificate,
        gap,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveOptions {
    pub starts: usize,
    pub seed: u64,
    /// Smallest poll step.
    pub tol: f64,
    /// Evaluations of `F` per start.
    pub budget: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            seed: 0,
            tol: 1e-5,
            budget: 5_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StartTrace {
    pub start: Vec<f64>,
    pub x: Vec<f64>,
    /// `F` at `x`; `None` when no feasible point was found.
    pub value: Option<f64>,
    /// Poll passes.
    pub iterations: usize,
    pub evaluations: usize,
    /// Evaluations at which the inner problem failed.
    pub infeasible: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub best_x: Vec<f64>,
    pub best_value: f64,
    pub first_stage: f64,
    pub worst_case: f64,
    pub starts: Vec<StartTrace>,
    pub inner_calls: usize,
    /// Distinct final values across starts (relative tolerance 1e-6).
    pub distinct_local_values: usize,
    /// Duality check at the incumbent, for the finite-support families.
    pub gap: Option<GapReport>,
    /// Why `gap` is missing, when it is.
    pub gap_note: Option<String>,
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let (mut inv, mut f) = (0.0, 1.0 / b);
    while i > 0 {
        inv += f * (i % base as u64) as f64;
        i /= base as u64;
        f /= b;
    }
    inv
}

/// Halton points in the unit cube, starting at index `seed + 1`.
pub fn halton(seed: u64, count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count as u64)
        .map(|k| {
            (0..dim)
                .map(|j| {
                    let base = PRIMES.get(j).copied().unwrap_or_else(|| nth_prime(j));
                    radical_inverse(seed + k + 1, base)
                })
                .collect()
        })
        .collect()
}

fn nth_prime(n: usize) -> u32 {
    (2u32..)
        .filter(|&c| (2..c).take_while(|d| d * d <= c).all(|d| c % d != 0))
        .nth(n)
        .unwrap()
}

struct Search<'a> {
    spec: &'a ProblemSpec,
    calls: &'a AtomicUsize,
}

impl Search<'_> {
    fn eval(&self, x: &[f64]) -> Option<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        objective_value(self.spec, x).ok().filter(|v| v.is_finite())
    }

    fn run(&self, start: Vec<f64>, options: &SolveOptions) -> StartTrace {
        let (lower, upper) = (&self.spec.lower, &self.spec.upper);
        let mut x = start.clone();
        let mut fx = self.eval(&x);
        let mut evaluations = 1;
        let mut infeasible = usize::from(fx.is_none());
        let mut step: Vec<f64> = lower.iter().zip(upper).map(|(a, b)| (b - a) / 4.0).collect();
        let mut iterations = 0;
        let worse = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => a < b,
            (Some(_), None) => true,
            _ => false,
        };
        while step.iter().any(|&s| s > options.tol) && evaluations < options.budget {
            iterations += 1;
            let mut improved = false;
            'poll: for j in 0..x.len() {
                for dir in [1.0, -1.0] {
                    let moved = (x[j] + dir * step[j]).clamp(lower[j], upper[j]);
                    if moved == x[j] {
                        continue;
                    }
                    let mut cand = x.clone();
                    cand[j] = moved;
                    let fc = self.eval(&cand);
                    evaluations += 1;
                    infeasible += usize::from(fc.is_none());
                    if worse(fc, fx) {
                        x = cand;
                        fx = fc;
                        improved = true;
                        break 'poll;
                    }
                    if evaluations >= options.budget {
                        break 'poll;
                    }
                }
            }
            if !improved {
                for s in &mut step {
                    *s /= 2.0;
                }
            }
        }
        StartTrace {
            start,
            x,
            value: fx,
            iterations,
            evaluations,
            infeasible,
        }
    }
}

/// Multistart coordinate pattern search for `min_x f(x) + Φ(x)`.
///
/// Starts are Halton points offset by the seed; from each, coordinates are
/// polled with steps starting at a quarter of the box width and halved
/// after every pass without improvement, down to `tol`. Decisions where the
/// inner problem fails count as `+∞`. Starts run in parallel and the merge
/// is deterministic: lowest value, then lexicographically smallest `x`,
/// then lowest start index.
pub fn minimize(spec: &ProblemSpec, options: &SolveOptions) -> Result<SolveReport> {
    if options.starts == 0 {
        return Err(Error::param("starts", 0.0, "must be positive"));
    }
    if !(options.tol > 0.0) {
        return Err(Error::param("tol", options.tol, "must be positive"));
    }
    let n = spec.dim();
    let starts: Vec<Vec<f64>> = halton(options.seed, options.starts, n)
        .into_iter()
        .map(|u| {
            u.iter()
                .enumerate()
                .map(|(j, t)| spec.lower[j] + t * (spec.upper[j] - spec.lower[j]))
                .collect()
        })
        .collect();
    let calls = AtomicUsize::new(0);
    let search = Search { spec, calls: &calls };
    let traces: Vec<StartTrace> = starts
        .into_par_iter()
        .map(|s| search.run(s, options))
        .collect();

    let best = traces
        .iter()
        .filter_map(|t| t.value.map(|v| (v, t)))
        .min_by(|(a, ta), (b, tb)| {
            a.total_cmp(b).then_with(|| {
                ta.x.iter()
                    .zip(&tb.x)
                    .map(|(p, q)| p.total_cmp(q))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });
    let Some((best_value, best)) = best else {
        return Err(Error::AmbiguityEmpty {
            x: Vec::new(),
            detail: "ambiguity set empty on sampled X".into(),
        });
    };
    let best_x = best.x.clone();

    let mut finals: Vec<f64> = traces.iter().filter_map(|t| t.value).collect();
    finals.sort_by(f64::total_cmp);
    let mut distinct = 0;
    let mut last: Option<f64> = None;
    for v in finals {
        if last.map_or(true, |l| (v - l).abs() > 1e-6 * (1.0 + l.abs())) {
            distinct += 1;
            last = Some(v);
        }
    }

    let first_stage = spec.objective_at(&best_x)?;
    let (gap, gap_note) = if spec.family().is_finite_support() {
        match validate_duality(spec, &best_x, spec.family()) {
            Ok(g) => (Some(g), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (
            None,
            Some(format!("{} is solved by its semi-infinite form; no finite dual", spec.family())),
        )
    };
    Ok(SolveReport {
        best_value,
        first_stage,
        worst_case: best_value - first_stage,
        best_x,
        starts: traces,
        inner_calls: calls.into_inner(),
        distinct_local_values: distinct,
        gap,
        gap_note,
    })
}
