//! Problem-file format. Every object rejects unknown keys, so a misspelled
//! parameter fails loudly instead of silently changing the ambiguity set.

use serde::{Deserialize, Serialize};

use ddro::expr::Expr;
use ddro::model::{
    AmbiguitySpec, CostDef, DySpec, KsSpec, KscSpec, MomentRow, Norm, PhiKind, PhiSpec,
    ProblemSpec, RecourseRow, ScenarioSet, SmSpec, SupportBox, WSpec, WcSpec,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_f: Option<String>,
    pub scenarios: Scenarios,
    pub cost: Cost,
    pub ambiguity: Ambiguity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decision {
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenarios {
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Cost {
    Expr { h: String },
    Recourse { q: Vec<String>, rows: Vec<Row> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Row {
    pub w: Vec<String>,
    pub t: Vec<String>,
    pub rhs: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Moment {
    pub f: String,
    pub lower: String,
    pub upper: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Divergence {
    Kl,
    #[serde(alias = "chisq")]
    Chi2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum Ambiguity {
    Sm {
        #[serde(default)]
        moments: Vec<Moment>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p_lower: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p_upper: Option<Vec<String>>,
    },
    Dy {
        mean: Vec<String>,
        cov: Vec<Vec<String>>,
        alpha: String,
        beta: String,
    },
    W {
        radius: String,
        #[serde(default)]
        norm: Norm,
    },
    Phi {
        radius: String,
        phi: Divergence,
    },
    Ks {
        radius: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        order: Option<Vec<usize>>,
    },
    Wc {
        radius: String,
        #[serde(default)]
        norm: Norm,
        #[serde(rename = "box")]
        support: BoxBounds,
    },
    Ksc {
        radius: String,
        #[serde(rename = "box")]
        support: BoxBounds,
        #[serde(default)]
        convex: bool,
    },
}

/// A field that failed to parse or convert.
#[derive(Debug, Clone, Serialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

struct Parser {
    n: usize,
    d: usize,
    errors: Vec<FieldError>,
}

impl Parser {
    fn expr(&mut self, path: &str, text: &str) -> Expr {
        Expr::parse(text, self.n, self.d).unwrap_or_else(|e| {
            self.errors.push(FieldError {
                path: path.to_string(),
                message: e.to_string(),
            });
            Expr::constant(f64::NAN)
        })
    }

    fn exprs(&mut self, path: &str, texts: &[String]) -> Vec<Expr> {
        texts
            .iter()
            .enumerate()
            .map(|(k, t)| self.expr(&format!("{path}[{k}]"), t))
            .collect()
    }
}

impl ProblemFile {
    /// Parses every expression; all failures are collected.
    pub fn to_spec(&self) -> Result<ProblemSpec, Vec<FieldError>> {
        let n = self.decision.dim;
        let d = self.scenarios.points.first().map_or(0, Vec::len);
        let mut p = Parser { n, d, errors: Vec::new() };
        for (what, len) in [("lower", self.decision.lower.len()), ("upper", self.decision.upper.len())] {
            if len != n {
                p.errors.push(FieldError {
                    path: format!("decision.{what}"),
                    message: format!("has {len} entries, dim is {n}"),
                });
            }
        }

        let objective = match &self.objective_f {
            Some(t) => p.expr("objective_f", t),
            None => Expr::constant(0.0),
        };
        let cost = match &self.cost {
            Cost::Expr { h } => CostDef::ClosedForm { h: p.expr("cost.h", h) },
            Cost::Recourse { q, rows } => CostDef::Recourse {
                q: p.exprs("cost.q", q),
                rows: rows
                    .iter()
                    .enumerate()
                    .map(|(k, r)| RecourseRow {
                        w: p.exprs(&format!("cost.rows[{k}].w"), &r.w),
                        t: p.exprs(&format!("cost.rows[{k}].t"), &r.t),
                        rhs: p.expr(&format!("cost.rows[{k}].rhs"), &r.rhs),
                    })
                    .collect(),
            },
        };
        let support = |b: &BoxBounds| SupportBox {
            lower: b.lower.clone(),
            upper: b.upper.clone(),
        };
        let ambiguity = match &self.ambiguity {
            Ambiguity::Sm { moments, p_lower, p_upper } => AmbiguitySpec::Sm(SmSpec {
                moments: moments
                    .iter()
                    .enumerate()
                    .map(|(k, m)| MomentRow {
                        f: p.expr(&format!("ambiguity.moments[{k}].f"), &m.f),
                        lower: p.expr(&format!("ambiguity.moments[{k}].lower"), &m.lower),
                        upper: p.expr(&format!("ambiguity.moments[{k}].upper"), &m.upper),
                    })
                    .collect(),
                p_lower: p_lower.as_ref().map(|v| p.exprs("ambiguity.p_lower", v)),
                p_upper: p_upper.as_ref().map(|v| p.exprs("ambiguity.p_upper", v)),
            }),
            Ambiguity::Dy { mean, cov, alpha, beta } => AmbiguitySpec::Dy(DySpec {
                mean: p.exprs("ambiguity.mean", mean),
                cov: cov
                    .iter()
                    .enumerate()
                    .map(|(i, row)| p.exprs(&format!("ambiguity.cov[{i}]"), row))
                    .collect(),
                alpha: p.expr("ambiguity.alpha", alpha),
                beta: p.expr("ambiguity.beta", beta),
            }),
            Ambiguity::W { radius, norm } => AmbiguitySpec::W(WSpec {
                radius: p.expr("ambiguity.radius", radius),
                norm: *norm,
            }),
            Ambiguity::Phi { radius, phi } => AmbiguitySpec::Phi(PhiSpec {
                radius: p.expr("ambiguity.radius", radius),
                phi: match phi {
                    Divergence::Kl => PhiKind::Kl,
                    Divergence::Chi2 => PhiKind::ChiSq,
                },
            }),
            Ambiguity::Ks { radius, order } => AmbiguitySpec::Ks(KsSpec {
                radius: p.expr("ambiguity.radius", radius),
                order: order.clone(),
            }),
            Ambiguity::Wc { radius, norm, support: b } => AmbiguitySpec::Wc(WcSpec {
                radius: p.expr("ambiguity.radius", radius),
                norm: *norm,
                support: support(b),
            }),
            Ambiguity::Ksc { radius, support: b, convex } => AmbiguitySpec::Ksc(KscSpec {
                radius: p.expr("ambiguity.radius", radius),
                support: support(b),
                convex: *convex,
            }),
        };
        if !p.errors.is_empty() {
            return Err(p.errors);
        }
        Ok(ProblemSpec::new(
            self.decision.lower.clone(),
            self.decision.upper.clone(),
            ScenarioSet::new(self.scenarios.points.clone(), self.scenarios.weights.clone()),
            cost,
            ambiguity,
        )
        .with_objective(objective))
    }
}
