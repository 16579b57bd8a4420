use std::fmt;

use serde::Serialize;

use crate::expr::Expr;
use crate::linalg::{symmetric_eigen, Matrix};

use super::{AmbiguitySpec, CostDef, PhiKind, ProblemSpec, SupportBox};

/// A violated invariant and where it was found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

const WEIGHT_TOL: f64 = 1e-12;

#[derive(Default)]
struct Checker {
    out: Vec<Diagnostic>,
}

impl Checker {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.out.push(Diagnostic {
            path: path.into(),
            message: message.into(),
        });
    }

    fn expr(&mut self, path: &str, e: &Expr, n: usize, d: usize, scenario_ok: bool) {
        if e.uses_decision() && e.decision_dim() != n {
            self.push(
                path,
                format!(
                    "expression parsed with {} decision components, problem has {n}",
                    e.decision_dim()
                ),
            );
        }
        if e.uses_scenario() {
            if !scenario_ok {
                self.push(path, "parameter must not depend on the scenario");
            } else if e.scenario_dim() != d {
                self.push(
                    path,
                    format!(
                        "expression parsed with {} scenario components, problem has {d}",
                        e.scenario_dim()
                    ),
                );
            }
        }
    }

    /// Parameter slot: decision only, evaluable at the midpoint.
    fn param(&mut self, path: &str, e: &Expr, n: usize, d: usize, mid: &[f64]) {
        let before = self.out.len();
        self.expr(path, e, n, d, false);
        if self.out.len() == before {
            if let Err(err) = e.eval(mid, None) {
                self.push(path, format!("cannot evaluate at the midpoint of the box: {err}"));
            }
        }
    }

    fn len(&mut self, path: &str, got: usize, expected: usize) -> bool {
        if got != expected {
            self.push(path, format!("expected {expected} entries, got {got}"));
            return false;
        }
        true
    }
}

/// Checks every invariant of `spec`; an empty list means valid.
pub fn validate(spec: &ProblemSpec) -> Vec<Diagnostic> {
    let mut c = Checker::default();
    let n = spec.lower.len();

    if n == 0 {
        c.push("decision.lower", "decision dimension must be at least 1");
    }
    c.len("decision.upper", spec.upper.len(), n);
    for (j, (l, u)) in spec.lower.iter().zip(&spec.upper).enumerate() {
        if !l.is_finite() || !u.is_finite() {
            c.push(format!("decision[{j}]"), "box bounds must be finite");
        } else if l > u {
            c.push(format!("decision[{j}]"), format!("lower bound {l} exceeds upper bound {u}"));
        }
    }
    let mid = spec.midpoint();

    let sc = &spec.scenarios;
    let d = sc.dim();
    if sc.is_empty() {
        c.push("scenarios.points", "at least one scenario is required");
    } else if d == 0 {
        c.push("scenarios.points", "scenario dimension must be at least 1");
    }
    for (k, p) in sc.points.iter().enumerate() {
        if p.len() != d {
            c.push(
                format!("scenarios.points[{k}]"),
                format!("expected {d} components, got {}", p.len()),
            );
        } else if p.iter().any(|v| !v.is_finite()) {
            c.push(format!("scenarios.points[{k}]"), "components must be finite");
        }
    }
    for a in 0..sc.len() {
        for b in a + 1..sc.len() {
            if sc.points[a] == sc.points[b] {
                c.push(
                    format!("scenarios.points[{b}]"),
                    format!("duplicates scenario {a}; points must be distinct"),
                );
            }
        }
    }
    if let Some(w) = &sc.weights {
        if c.len("scenarios.weights", w.len(), sc.len()) {
            if let Some(k) = w.iter().position(|v| !v.is_finite() || *v < 0.0) {
                c.push(format!("scenarios.weights[{k}]"), "weights must be nonnegative");
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_TOL {
                c.push(
                    "scenarios.weights",
                    format!("reference weights do not sum to 1 (sum = {sum})"),
                );
            }
        }
    }

    c.param("objective_f", &spec.objective, n, d, &mid);

    match &spec.cost {
        CostDef::ClosedForm { h } => c.expr("cost.h", h, n, d, true),
        CostDef::Recourse { q, rows } => {
            if q.is_empty() {
                c.push("cost.q", "recourse needs at least one second-stage variable");
            }
            for (j, e) in q.iter().enumerate() {
                c.expr(&format!("cost.q[{j}]"), e, n, d, true);
            }
            for (i, row) in rows.iter().enumerate() {
                let path = format!("cost.rows[{i}]");
                c.len(&format!("{path}.w"), row.w.len(), q.len());
                c.len(&format!("{path}.t"), row.t.len(), n);
                for (j, e) in row.w.iter().enumerate() {
                    c.expr(&format!("{path}.w[{j}]"), e, n, d, true);
                }
                for (j, e) in row.t.iter().enumerate() {
                    c.expr(&format!("{path}.t[{j}]"), e, n, d, true);
                }
                c.expr(&format!("{path}.rhs"), &row.rhs, n, d, true);
            }
        }
    }

    let big_n = sc.len();
    match &spec.ambiguity {
        AmbiguitySpec::Sm(sm) => {
            for (r, row) in sm.moments.iter().enumerate() {
                let path = format!("ambiguity.moments[{r}]");
                c.expr(&format!("{path}.f"), &row.f, n, d, true);
                c.param(&format!("{path}.lower"), &row.lower, n, d, &mid);
                c.param(&format!("{path}.upper"), &row.upper, n, d, &mid);
            }
            for (name, list) in [("p_lower", &sm.p_lower), ("p_upper", &sm.p_upper)] {
                if let Some(list) = list {
                    let path = format!("ambiguity.{name}");
                    c.len(&path, list.len(), big_n);
                    for (k, e) in list.iter().enumerate() {
                        c.param(&format!("{path}[{k}]"), e, n, d, &mid);
                    }
                }
            }
        }
        AmbiguitySpec::Dy(dy) => {
            c.len("ambiguity.mean", dy.mean.len(), d);
            for (k, e) in dy.mean.iter().enumerate() {
                c.param(&format!("ambiguity.mean[{k}]"), e, n, d, &mid);
            }
            c.param("ambiguity.alpha", &dy.alpha, n, d, &mid);
            c.param("ambiguity.beta", &dy.beta, n, d, &mid);
            let square = dy.cov.len() == d && dy.cov.iter().all(|r| r.len() == d);
            if !square {
                c.push("ambiguity.cov", format!("expected a {d} x {d} matrix"));
            } else {
                let before = c.out.len();
                for (i, row) in dy.cov.iter().enumerate() {
                    for (j, e) in row.iter().enumerate() {
                        c.param(&format!("ambiguity.cov[{i}][{j}]"), e, n, d, &mid);
                    }
                }
                if c.out.len() == before {
                    check_cov(&mut c, &dy.cov, &mid);
                }
            }
        }
        AmbiguitySpec::W(w) => c.param("ambiguity.radius", &w.radius, n, d, &mid),
        AmbiguitySpec::Phi(phi) => {
            c.param("ambiguity.radius", &phi.radius, n, d, &mid);
            if phi.phi == PhiKind::Kl {
                if let Some(w) = &sc.weights {
                    if w.iter().any(|&v| v <= 0.0) {
                        c.push(
                            "scenarios.weights",
                            "reference weights must be positive under KL",
                        );
                    }
                }
            }
        }
        AmbiguitySpec::Ks(ks) => {
            c.param("ambiguity.radius", &ks.radius, n, d, &mid);
            if let Some(order) = &ks.order {
                let mut seen = vec![false; big_n];
                let ok = order.len() == big_n
                    && order
                        .iter()
                        .all(|&k| k < big_n && !std::mem::replace(&mut seen[k], true));
                if !ok {
                    c.push(
                        "ambiguity.order",
                        format!("must be a permutation of 0..{big_n}"),
                    );
                }
            }
        }
        AmbiguitySpec::Wc(wc) => {
            c.param("ambiguity.radius", &wc.radius, n, d, &mid);
            check_support(&mut c, spec, &wc.support);
        }
        AmbiguitySpec::Ksc(ksc) => {
            c.param("ambiguity.radius", &ksc.radius, n, d, &mid);
            check_support(&mut c, spec, &ksc.support);
            for k in 0..d {
                let mut coords: Vec<f64> = sc
                    .points
                    .iter()
                    .filter_map(|p| p.get(k).copied())
                    .collect();
                coords.sort_by(f64::total_cmp);
                if coords.windows(2).any(|w| w[0] == w[1]) {
                    c.push(
                        "scenarios.points",
                        format!(
                            "coordinate {k} repeats across samples; jitter or remove ties \
                             so the cell grid is well defined"
                        ),
                    );
                }
            }
        }
    }
    c.out
}

fn check_cov(c: &mut Checker, cov: &[Vec<Expr>], mid: &[f64]) {
    let d = cov.len();
    let mut m = Matrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = cov[i][j].eval(mid, None).unwrap_or(f64::NAN);
        }
    }
    if !m.is_finite() {
        c.push("ambiguity.cov", "entries must be finite at the midpoint of the box");
        return;
    }
    if m.asymmetry() > 1e-12 * (1.0 + m.max_abs()) {
        c.push("ambiguity.cov", "matrix is not symmetric at the midpoint of the box");
        return;
    }
    let min = symmetric_eigen(&m).min_value();
    if min <= 0.0 {
        c.push(
            "ambiguity.cov",
            format!("matrix is not positive definite at the midpoint (smallest eigenvalue {min:e})"),
        );
    }
}

fn check_support(c: &mut Checker, spec: &ProblemSpec, support: &SupportBox) {
    let d = spec.scenario_dim();
    let ok_len = c.len("ambiguity.box.lower", support.lower.len(), d)
        & c.len("ambiguity.box.upper", support.upper.len(), d);
    if !ok_len {
        return;
    }
    for k in 0..d {
        let (a, b) = (support.lower[k], support.upper[k]);
        if !(a.is_finite() && b.is_finite() && a < b) {
            c.push(format!("ambiguity.box[{k}]"), "need finite bounds with lower < upper");
        }
    }
    for (k, p) in spec.scenarios.points.iter().enumerate() {
        if p.len() == d && !support.contains(p) {
            c.push(format!("scenarios.points[{k}]"), "sample lies outside the support box");
        }
    }
    if let Some(w) = &spec.scenarios.weights {
        let u = 1.0 / spec.num_scenarios() as f64;
        if w.iter().any(|v| (v - u).abs() > WEIGHT_TOL) {
            c.push(
                "scenarios.weights",
                "continuous-support families use the empirical (uniform) reference",
            );
        }
    }
}
