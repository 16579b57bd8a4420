//! Cutting-surface solver for semi-infinite programs
//! `min cᵀv` over a box subject to `g(v, t) ≤ 0` for every `t` in an index
//! set, with `g` affine in `v`.
//!
//! Each iteration solves an LP master over the finitely many index points
//! collected so far, then looks for the most violated index point and adds
//! it. The loop stops once the violation is at most `ε/2`.
//!
//! Builders for the continuous-support Wasserstein and CDF families and for
//! the divergence family live in the submodules.

mod ks;
mod phi;
mod search;
mod wass;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::lp::{LinearProgram, LpStatus, RowKind, Sense};
use crate::scalar::{dot, Real};

pub use ks::{build_ks_cont, build_ks_cont_with, ks_cont_value, KsCellGrid, KsContProgram, KsContSolution};
pub use phi::build_phi_sip;
pub use search::{separation_max, GridOptions, Separation};
pub use wass::{build_wass_cont, wass_cont_value};

/// Default feasibility tolerance.
pub const DEFAULT_EPSILON: f64 = 1e-4;
/// Default iteration cap.
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;
/// Refinement factor of the verification grid over the separation grid.
pub const VERIFY_FACTOR: usize = 10;

/// A point of the index set: a continuous part and a finite tag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexPoint<T> {
    pub s: Vec<T>,
    pub tag: usize,
}

impl<T> IndexPoint<T> {
    pub fn new(s: Vec<T>, tag: usize) -> Self {
        Self { s, tag }
    }
}

/// Constraint family `g(v, t) = row(t)·v + offset(t)`.
pub trait Constraint<T: Real>: Sync {
    /// Number of master variables.
    fn dim(&self) -> usize;

    /// Coefficients and offset at `t`.
    fn row(&self, t: &IndexPoint<T>) -> Result<(Vec<T>, T)>;

    /// `g(v, t)`.
    fn value(&self, v: &[T], t: &IndexPoint<T>) -> Result<T> {
        let (a, b) = self.row(t)?;
        Ok(dot(&a, v) + b)
    }
}

/// Constraint given by a closure returning the row at each index point.
pub struct AffineFn<F> {
    dim: usize,
    row: F,
}

impl<F> AffineFn<F> {
    pub fn new(dim: usize, row: F) -> Self {
        Self { dim, row }
    }
}

impl<T, F> Constraint<T> for AffineFn<F>
where
    T: Real,
    F: Fn(&IndexPoint<T>) -> Result<(Vec<T>, T)> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn row(&self, t: &IndexPoint<T>) -> Result<(Vec<T>, T)> {
        (self.row)(t)
    }
}

/// Constraint written as an expression with the master variables as `x`
/// and the continuous index as `xi`. The tag is ignored.
///
/// Rows are read off by evaluating at the origin and the unit vectors; the
/// solver checks each new cut against a direct evaluation and rejects
/// expressions that are not affine in `x`.
pub struct ExprConstraint {
    pub expr: Expr,
    pub dim: usize,
}

impl<T: Real> Constraint<T> for ExprConstraint {
    fn dim(&self) -> usize {
        self.dim
    }

    fn row(&self, t: &IndexPoint<T>) -> Result<(Vec<T>, T)> {
        let mut v = vec![T::zero(); self.dim];
        let offset = self.expr.eval(&v, Some(&t.s))?;
        let mut coeffs = Vec::with_capacity(self.dim);
        for j in 0..self.dim {
            v[j] = T::one();
            coeffs.push(self.expr.eval(&v, Some(&t.s))? - offset);
            v[j] = T::zero();
        }
        Ok((coeffs, offset))
    }

    fn value(&self, v: &[T], t: &IndexPoint<T>) -> Result<T> {
        Ok(self.expr.eval(v, Some(&t.s))?)
    }
}

/// Index set of the semi-infinite constraint.
#[derive(Debug, Clone, Serialize)]
pub enum IndexSet<T> {
    /// `[lower, upper] × {0, …, tags − 1}`. `seeds` are evaluated by every
    /// separation in addition to the grid.
    Box {
        lower: Vec<T>,
        upper: Vec<T>,
        tags: usize,
        seeds: Vec<IndexPoint<T>>,
    },
    Finite(Vec<IndexPoint<T>>),
}

/// Exact separation: returns a maximizer of `g(v, ·)` for the master point.
pub type Oracle<'a, T> = Box<dyn Fn(&[T]) -> Result<IndexPoint<T>> + Sync + 'a>;

pub struct SipProblem<'a, T: Real> {
    /// Master objective.
    pub cost: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub constraint: Box<dyn Constraint<T> + 'a>,
    pub index: IndexSet<T>,
    pub epsilon: T,
    /// Lipschitz bound of `g(v, ·)` in the continuous index, used to size
    /// the separation grid.
    pub lipschitz: Option<T>,
    pub grid: GridOptions,
    /// Replaces the grid search when set.
    pub oracle: Option<Oracle<'a, T>>,
    pub max_iterations: usize,
}

impl<'a, T: Real> SipProblem<'a, T> {
    pub fn new(
        cost: Vec<T>,
        lower: Vec<T>,
        upper: Vec<T>,
        constraint: Box<dyn Constraint<T> + 'a>,
        index: IndexSet<T>,
    ) -> Self {
        Self {
            cost,
            lower,
            upper,
            constraint,
            index,
            epsilon: T::lit(DEFAULT_EPSILON),
            lipschitz: None,
            grid: GridOptions::default(),
            oracle: None,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_lipschitz(mut self, bound: T) -> Self {
        self.lipschitz = Some(bound);
        self
    }

    pub fn with_grid(mut self, grid: GridOptions) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_oracle(mut self, oracle: Oracle<'a, T>) -> Self {
        self.oracle = Some(oracle);
        self
    }

    pub fn with_max_iterations(mut self, cap: usize) -> Self {
        self.max_iterations = cap;
        self
    }

    fn check(&self) -> Result<()> {
        let n = self.constraint.dim();
        for (what, len) in [("cost", self.cost.len()), ("lower", self.lower.len()), ("upper", self.upper.len())] {
            if len != n {
                return Err(Error::Dimension {
                    what: format!("master {what}"),
                    expected: n,
                    got: len,
                });
            }
        }
        if !(self.epsilon > T::zero()) {
            return Err(Error::param("epsilon", self.epsilon.as_f64(), "must be positive"));
        }
        match &self.index {
            IndexSet::Box { lower, upper, tags, .. } => {
                if lower.len() != upper.len() {
                    return Err(Error::Dimension {
                        what: "index box".into(),
                        expected: lower.len(),
                        got: upper.len(),
                    });
                }
                if *tags == 0 {
                    return Err(Error::Invalid("index set has no tags".into()));
                }
                if lower.iter().zip(upper).any(|(a, b)| !a.is_finite() || !b.is_finite() || a > b) {
                    return Err(Error::Invalid("index box must be finite and nonempty".into()));
                }
            }
            IndexSet::Finite(points) if points.is_empty() => {
                return Err(Error::Invalid("finite index set is empty".into()));
            }
            IndexSet::Finite(_) => {}
        }
        Ok(())
    }

    /// Grid points per dimension for the separation search, and a warning
    /// when its accuracy is not backed by a Lipschitz bound.
    fn grid_density(&self) -> (usize, Option<String>) {
        let IndexSet::Box { lower, upper, .. } = &self.index else {
            return (0, None);
        };
        let d = lower.len();
        let base = self.grid.points.max(2);
        let Some(lip) = self.lipschitz else {
            return (
                base,
                Some(format!(
                    "no Lipschitz bound given; separation uses {base} points per dimension and its accuracy is heuristic"
                )),
            );
        };
        let width = lower
            .iter()
            .zip(upper)
            .map(|(&a, &b)| (b - a).as_f64())
            .fold(0.0, f64::max);
        // Every point of the box is within spacing·√d/2 of the grid.
        let spacing = self.epsilon.as_f64() / (lip.as_f64() * (d.max(1) as f64).sqrt());
        let wanted = ((width / spacing).ceil() as usize + 1).max(base);
        let cap = (self.grid.max_points as f64).powf(1.0 / d.max(1) as f64).floor() as usize;
        if wanted > cap {
            (
                cap.max(2),
                Some(format!(
                    "Lipschitz bound asks for {wanted} points per dimension, capped at {cap}; accuracy is heuristic"
                )),
            )
        } else {
            (wanted, None)
        }
    }

    /// Most violated index point at `v`.
    fn separate(&self, v: &[T], per_dim: usize) -> Result<Separation<T>> {
        if let Some(oracle) = &self.oracle {
            let point = oracle(v)?;
            let value = self.constraint.value(v, &point)?;
            return Ok(Separation { point, value, evaluations: 1 });
        }
        match &self.index {
            IndexSet::Finite(points) => finite_max(self.constraint.as_ref(), v, points),
            IndexSet::Box { lower, upper, tags, seeds } => {
                let f = |s: &[T], tag: usize| self.constraint.value(v, &IndexPoint::new(s.to_vec(), tag));
                let grid = GridOptions { points: per_dim, ..self.grid.clone() };
                let mut best = separation_max(f, lower, upper, *tags, &grid)?;
                for seed in seeds {
                    let value = self.constraint.value(v, seed)?;
                    best.evaluations += 1;
                    if value > best.value {
                        best.value = value;
                        best.point = seed.clone();
                    }
                }
                Ok(best)
            }
        }
    }
}

fn finite_max<T: Real>(g: &dyn Constraint<T>, v: &[T], points: &[IndexPoint<T>]) -> Result<Separation<T>> {
    let mut best: Option<(usize, T)> = None;
    for (k, t) in points.iter().enumerate() {
        let value = g.value(v, t)?;
        if best.map_or(true, |(_, b)| value > b) {
            best = Some((k, value));
        }
    }
    let (k, value) = best.expect("nonempty index set");
    Ok(Separation {
        point: points[k].clone(),
        value,
        evaluations: points.len(),
    })
}

/// Progress of the cutting-surface loop.
#[derive(Debug, Clone, Serialize)]
pub struct SipState<T> {
    pub iteration: usize,
    /// Working index set, in the order points were added.
    pub points: Vec<IndexPoint<T>>,
    /// Latest master solution.
    pub x: Vec<T>,
    /// Master objective per iteration.
    pub master_values: Vec<T>,
    /// Separation value per iteration.
    pub violations: Vec<T>,
    pub converged: bool,
    /// Separation grid points per dimension (0 for finite or oracle
    /// separation).
    pub grid_points: usize,
    pub warnings: Vec<String>,
}

impl<T: Real> SipState<T> {
    /// Master objective at termination.
    pub fn value(&self) -> T {
        self.master_values.last().copied().unwrap_or(T::nan())
    }

    pub fn last_violation(&self) -> T {
        self.violations.last().copied().unwrap_or(T::nan())
    }
}

/// Runs the cutting-surface loop. Hitting the iteration cap is not an error
/// here; the returned state then has `converged == false`.
pub fn run_sip<T: Real>(problem: &SipProblem<'_, T>) -> Result<SipState<T>> {
    problem.check()?;
    let (per_dim, warning) = if problem.oracle.is_some() {
        (0, None)
    } else {
        problem.grid_density()
    };
    let mut state = SipState {
        iteration: 0,
        points: Vec::new(),
        x: Vec::new(),
        master_values: Vec::new(),
        violations: Vec::new(),
        converged: false,
        grid_points: per_dim,
        warnings: warning.into_iter().collect(),
    };
    let half = problem.epsilon / T::lit(2.0);
    let mut master = LinearProgram::new(Sense::Minimize, problem.cost.clone());
    for j in 0..problem.cost.len() {
        master.set_bounds(j, problem.lower[j], problem.upper[j]);
    }
    loop {
        let sol = master.solve()?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                return Err(Error::Invalid(format!(
                    "semi-infinite master infeasible at iteration {}",
                    state.iteration
                )))
            }
            LpStatus::Unbounded => {
                return Err(Error::Invalid(
                    "semi-infinite master unbounded; bound the master variables".into(),
                ))
            }
        }
        state.x = sol.x;
        state.master_values.push(sol.objective);

        let sep = problem.separate(&state.x, per_dim)?;
        state.violations.push(sep.value);
        if sep.value <= half {
            state.converged = true;
            return Ok(state);
        }
        if state.iteration >= problem.max_iterations {
            return Ok(state);
        }
        let (coeffs, offset) = problem.constraint.row(&sep.point)?;
        let affine = dot(&coeffs, &state.x) + offset;
        if (affine - sep.value).abs() > T::tol(1e-8) * (T::one() + sep.value.abs()) {
            return Err(Error::Invalid(
                "constraint is not affine in the master variables".into(),
            ));
        }
        master.add_row(coeffs, RowKind::Le, -offset);
        state.points.push(sep.point);
        state.iteration += 1;
    }
}

/// Algorithm loop with the iteration cap reported as an error.
pub fn solve_sip<T: Real>(problem: &SipProblem<'_, T>) -> Result<(Vec<T>, SipState<T>)> {
    let state = run_sip(problem)?;
    if !state.converged {
        return Err(Error::NonTermination {
            iterations: state.iteration,
            violation: state.last_violation().as_f64(),
        });
    }
    Ok((state.x.clone(), state))
}

/// Largest constraint value at `v` over a grid [`VERIFY_FACTOR`] times finer
/// than the separation grid (exact for finite index sets and oracles).
pub fn verify<T: Real>(problem: &SipProblem<'_, T>, v: &[T]) -> Result<T> {
    if problem.oracle.is_some() || matches!(problem.index, IndexSet::Finite(_)) {
        return Ok(problem.separate(v, 0)?.value);
    }
    let IndexSet::Box { lower, upper, tags, .. } = &problem.index else {
        unreachable!()
    };
    let (per_dim, _) = problem.grid_density();
    let fine = GridOptions {
        points: per_dim * VERIFY_FACTOR,
        starts: 0,
        max_points: usize::MAX,
        ..problem.grid.clone()
    };
    let f = |s: &[T], tag: usize| problem.constraint.value(v, &IndexPoint::new(s.to_vec(), tag));
    Ok(separation_max(f, lower, upper, *tags, &fine)?.value)
}

#[cfg(test)]
mod tests;
