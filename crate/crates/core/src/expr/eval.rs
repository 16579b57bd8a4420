use crate::scalar::Real;

use super::{BinOp, EvalError, Expr, Func, Node, NodeKind};

impl Expr {
    /// Evaluates at decision `x` and, when the expression refers to the
    /// scenario, at scenario `xi`. Operands are evaluated left to right.
    pub fn eval<T: Real>(&self, x: &[T], xi: Option<&[T]>) -> Result<T, EvalError> {
        if self.uses_decision() && x.len() != self.n {
            return Err(EvalError::Dimension {
                what: "decision",
                expected: self.n,
                got: x.len(),
            });
        }
        if self.uses_scenario() {
            match xi {
                None => return Err(EvalError::MissingScenario),
                Some(s) if s.len() != self.d => {
                    return Err(EvalError::Dimension {
                        what: "scenario",
                        expected: self.d,
                        got: s.len(),
                    })
                }
                _ => {}
            }
        }
        eval_node(&self.root, x, xi.unwrap_or(&[]))
    }
}

fn eval_node<T: Real>(node: &Node, x: &[T], xi: &[T]) -> Result<T, EvalError> {
    let offset = node.offset;
    let domain = |op, arg: T| EvalError::Domain {
        op,
        offset,
        arg: arg.as_f64(),
    };
    let finite = |op, v: T| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { op, offset })
        }
    };
    match &node.kind {
        NodeKind::Const(v) => finite("constant", T::lit(*v)),
        NodeKind::Decision(j) => Ok(x[*j]),
        NodeKind::Scenario(k) => Ok(xi[*k]),
        NodeKind::Neg(a) => Ok(-eval_node(a, x, xi)?),
        NodeKind::Call(func, a) => {
            let t = eval_node(a, x, xi)?;
            match func {
                Func::Exp => finite("exp", t.exp()),
                Func::Log => {
                    if t <= T::zero() {
                        Err(domain("log", t))
                    } else {
                        Ok(t.ln())
                    }
                }
                Func::Sqrt => {
                    if t < T::zero() {
                        Err(domain("sqrt", t))
                    } else {
                        Ok(t.sqrt())
                    }
                }
                Func::Abs => Ok(t.abs()),
            }
        }
        NodeKind::Binary(op, a, b) => {
            let l = eval_node(a, x, xi)?;
            let r = eval_node(b, x, xi)?;
            match op {
                BinOp::Add => finite("+", l + r),
                BinOp::Sub => finite("-", l - r),
                BinOp::Mul => finite("*", l * r),
                BinOp::Div => {
                    if r == T::zero() {
                        Err(domain("division", r))
                    } else {
                        finite("/", l / r)
                    }
                }
                BinOp::Pow => pow(l, r, &domain, &finite),
            }
        }
    }
}

fn pow<T: Real>(
    base: T,
    exp: T,
    domain: &dyn Fn(&'static str, T) -> EvalError,
    finite: &dyn Fn(&'static str, T) -> Result<T, EvalError>,
) -> Result<T, EvalError> {
    let integral = exp.fract() == T::zero() && exp.abs() <= T::lit(1024.0);
    if base == T::zero() && exp < T::zero() {
        return Err(domain("^", base));
    }
    if base < T::zero() && !integral {
        return Err(domain("^", base));
    }
    let v = if integral {
        base.powi(exp.to_i32().unwrap_or(0))
    } else {
        base.powf(exp)
    };
    finite("^", v)
}
