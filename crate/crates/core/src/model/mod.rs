//! Problem container: decision box, first-stage objective, scenarios, cost
//! and the ambiguity set.
//!
//! A [`ProblemSpec`] is data plus expressions; nothing is evaluated until a
//! decision `x` is supplied. [`ProblemSpec::sm_instance`] and friends turn it
//! into numeric inner problems at a fixed `x`.

mod instance;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::lp::{LinearProgram, LpStatus, RowKind, Sense};
use crate::scalar::Real;

pub use instance::{distance_matrix, DyInstance, KsInstance, PhiInstance, SmInstance, WInstance};
pub use validate::{validate, Diagnostic};

/// Ground norm for transport distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    #[default]
    L2,
    Linf,
}

impl Norm {
    pub fn distance<T: Real>(self, a: &[T], b: &[T]) -> T {
        let diffs = a.iter().zip(b).map(|(&u, &v)| (u - v).abs());
        match self {
            Norm::L1 => diffs.sum(),
            Norm::L2 => diffs.map(|t| t * t).sum::<T>().sqrt(),
            Norm::Linf => diffs.fold(T::zero(), T::max),
        }
    }
}

/// Divergence generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiKind {
    /// `t log t`, with `0 log 0 = 0`.
    Kl,
    /// `(t - 1)^2`.
    ChiSq,
}

impl PhiKind {
    pub fn value<T: Real>(self, t: T) -> T {
        match self {
            PhiKind::Kl if t <= T::zero() => T::zero(),
            PhiKind::Kl => t * t.ln(),
            PhiKind::ChiSq => (t - T::one()) * (t - T::one()),
        }
    }

    /// Derivative; `-∞` for KL at zero.
    pub fn derivative<T: Real>(self, t: T) -> T {
        match self {
            PhiKind::Kl if t <= T::zero() => T::neg_infinity(),
            PhiKind::Kl => t.ln() + T::one(),
            PhiKind::ChiSq => T::lit(2.0) * (t - T::one()),
        }
    }

    /// `Σ ref_i φ(p_i / ref_i)`. Entries with zero reference weight
    /// contribute 0 when `p_i = 0` and `+∞` otherwise.
    pub fn divergence<T: Real>(self, p: &[T], reference: &[T]) -> T {
        let mut total = T::zero();
        for (&pi, &ri) in p.iter().zip(reference) {
            if ri <= T::zero() {
                if pi > T::zero() {
                    return T::infinity();
                }
                continue;
            }
            total += ri * self.value(pi / ri);
        }
        total
    }
}

/// Fixed finite support with optional reference distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSet {
    pub points: Vec<Vec<f64>>,
    /// Reference weights; uniform when absent.
    pub weights: Option<Vec<f64>>,
}

impl ScenarioSet {
    pub fn new(points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Self {
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Reference weights, uniform if none were given.
    pub fn reference(&self) -> Vec<f64> {
        match &self.weights {
            Some(w) => w.clone(),
            None => vec![1.0 / self.len() as f64; self.len()],
        }
    }

    /// Indices sorted lexicographically by point.
    pub fn lexicographic_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.points[a]
                .iter()
                .zip(&self.points[b])
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        idx
    }
}

/// One recourse constraint `w·y ≥ rhs − t·x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecourseRow {
    pub w: Vec<Expr>,
    pub t: Vec<Expr>,
    pub rhs: Expr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CostDef {
    /// `h(x, ξ)` given directly.
    #[serde(rename = "expr")]
    ClosedForm { h: Expr },
    /// `h(x, ξ) = min qᵀy` over free `y` with `W y ≥ rhs − T x`.
    Recourse { q: Vec<Expr>, rows: Vec<RecourseRow> },
}

/// Moment row `lower ≤ E[f] ≤ upper`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub f: Expr,
    pub lower: Expr,
    pub upper: Expr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmSpec {
    /// Moment rows besides normalization, which is always added.
    pub moments: Vec<MomentRow>,
    /// Per-scenario probability bounds; `[0, 1]` when absent.
    pub p_lower: Option<Vec<Expr>>,
    pub p_upper: Option<Vec<Expr>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DySpec {
    pub mean: Vec<Expr>,
    /// Full `d × d` matrix; evaluation reads the upper triangle.
    pub cov: Vec<Vec<Expr>>,
    /// Ellipsoid radius on the mean.
    pub alpha: Expr,
    /// Scale of the second-moment bound.
    pub beta: Expr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WSpec {
    pub radius: Expr,
    pub norm: Norm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiSpec {
    pub radius: Expr,
    pub phi: PhiKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsSpec {
    pub radius: Expr,
    /// Order of the scenarios for cumulative sums; lexicographic by point
    /// when absent.
    pub order: Option<Vec<usize>>,
}

/// Axis-aligned support box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SupportBox {
    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (a, b))| a <= v && v <= b)
    }

    pub fn diameter(&self, norm: Norm) -> f64 {
        norm.distance(&self.lower, &self.upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WcSpec {
    pub radius: Expr,
    pub norm: Norm,
    pub support: SupportBox,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KscSpec {
    pub radius: Expr,
    pub support: SupportBox,
    /// Declares `h(x, ·)` convex, so cell suprema are taken at corners.
    pub convex: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum AmbiguitySpec {
    Sm(SmSpec),
    Dy(DySpec),
    W(WSpec),
    Phi(PhiSpec),
    Ks(KsSpec),
    Wc(WcSpec),
    Ksc(KscSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Sm,
    Dy,
    W,
    Phi,
    Ks,
    Wc,
    Ksc,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Sm => "sm",
            Family::Dy => "dy",
            Family::W => "w",
            Family::Phi => "phi",
            Family::Ks => "ks",
            Family::Wc => "wc",
            Family::Ksc => "ksc",
        }
    }

    /// Families over the fixed finite support.
    pub fn is_finite_support(self) -> bool {
        !matches!(self, Family::Wc | Family::Ksc)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl AmbiguitySpec {
    pub fn family(&self) -> Family {
        match self {
            AmbiguitySpec::Sm(_) => Family::Sm,
            AmbiguitySpec::Dy(_) => Family::Dy,
            AmbiguitySpec::W(_) => Family::W,
            AmbiguitySpec::Phi(_) => Family::Phi,
            AmbiguitySpec::Ks(_) => Family::Ks,
            AmbiguitySpec::Wc(_) => Family::Wc,
            AmbiguitySpec::Ksc(_) => Family::Ksc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// First-stage cost `f(x)`.
    pub objective: Expr,
    pub scenarios: ScenarioSet,
    pub cost: CostDef,
    pub ambiguity: AmbiguitySpec,
}

impl ProblemSpec {
    /// A spec with zero first-stage cost.
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        scenarios: ScenarioSet,
        cost: CostDef,
        ambiguity: AmbiguitySpec,
    ) -> Self {
        Self {
            lower,
            upper,
            objective: Expr::constant(0.0),
            scenarios,
            cost,
            ambiguity,
        }
    }

    pub fn with_objective(mut self, objective: Expr) -> Self {
        self.objective = objective;
        self
    }

    pub fn family(&self) -> Family {
        self.ambiguity.family()
    }

    /// Decision dimension.
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn scenario_dim(&self) -> usize {
        self.scenarios.dim()
    }

    pub fn num_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// Checks the dimension of `x` and that it lies in the box.
    pub fn check_decision<T: Real>(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                what: "decision".into(),
                expected: self.dim(),
                got: x.len(),
            });
        }
        let slack = |b: f64| 1e-12 * (1.0 + b.abs());
        let outside = x.iter().zip(self.lower.iter().zip(&self.upper)).any(|(v, (&l, &u))| {
            let v = v.as_f64();
            !v.is_finite() || v < l - slack(l) || v > u + slack(u)
        });
        if outside {
            return Err(Error::OutsideBox {
                x: x.iter().map(|v| v.as_f64()).collect(),
            });
        }
        Ok(())
    }

    /// First-stage cost `f(x)`.
    pub fn objective_at<T: Real>(&self, x: &[T]) -> Result<T> {
        param(&self.objective, "objective", x)
    }

    /// Scenario `k` converted to `T`.
    pub fn point<T: Real>(&self, k: usize) -> Vec<T> {
        self.scenarios.points[k].iter().map(|&v| T::lit(v)).collect()
    }

    /// `h(x, ξ)` at an arbitrary scenario point.
    pub fn cost_at<T: Real>(&self, x: &[T], xi: &[T]) -> Result<T> {
        match &self.cost {
            CostDef::ClosedForm { h } => Ok(h.eval(x, Some(xi))?),
            CostDef::Recourse { q, rows } => recourse_value(q, rows, x, xi),
        }
    }

    /// `h(x, ξᵏ)` for scenario index `k`.
    pub fn cost_eval<T: Real>(&self, x: &[T], k: usize) -> Result<T> {
        if k >= self.num_scenarios() {
            return Err(Error::Dimension {
                what: "scenario index".into(),
                expected: self.num_scenarios(),
                got: k,
            });
        }
        self.cost_at(x, &self.point::<T>(k))
    }

    /// Costs at every scenario.
    pub fn costs<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        (0..self.num_scenarios())
            .map(|k| self.cost_eval(x, k))
            .collect()
    }
}

/// `h(x, ξᵏ)`; see [`ProblemSpec::cost_eval`].
pub fn cost_eval<T: Real>(spec: &ProblemSpec, x: &[T], k: usize) -> Result<T> {
    spec.check_decision(x)?;
    spec.cost_eval(x, k)
}

/// Evaluates an x-only expression, naming it in errors.
pub(crate) fn param<T: Real>(e: &Expr, name: &str, x: &[T]) -> Result<T> {
    e.eval(x, None).map_err(|source| Error::Parameter {
        name: name.to_string(),
        source,
    })
}

fn recourse_value<T: Real>(q: &[Expr], rows: &[RecourseRow], x: &[T], xi: &[T]) -> Result<T> {
    let at = |e: &Expr| e.eval(x, Some(xi));
    let cost = q.iter().map(at).collect::<Result<Vec<T>, _>>()?;
    let mut lp = LinearProgram::new(Sense::Minimize, cost);
    for j in 0..q.len() {
        lp.set_bounds(j, T::neg_infinity(), T::infinity());
    }
    for row in rows {
        let w = row.w.iter().map(at).collect::<Result<Vec<T>, _>>()?;
        let mut rhs = at(&row.rhs)?;
        for (t, &xj) in row.t.iter().zip(x) {
            rhs -= at(t)? * xj;
        }
        lp.add_row(w, RowKind::Ge, rhs);
    }
    let sol = lp.solve()?;
    let point = || {
        (
            x.iter().map(|v| v.as_f64()).collect(),
            xi.iter().map(|v| v.as_f64()).collect(),
        )
    };
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        LpStatus::Infeasible => {
            let (x, xi) = point();
            Err(Error::RecourseInfeasible { x, xi })
        }
        LpStatus::Unbounded => {
            let (x, xi) = point();
            Err(Error::RecourseUnbounded { x, xi })
        }
    }
}
