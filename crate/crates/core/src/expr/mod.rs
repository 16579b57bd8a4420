//! Scalar expression language for decision-dependent parameters and costs.
//!
//! Expressions are infix with the usual precedence (`^` binds tightest and
//! is right-associative, unary minus binds looser than `^`). Decision
//! components are written `x1..xn`, scenario components `xi1..xid`; when a
//! dimension is 1 the bare names `x` and `xi` are accepted too. Functions:
//! `exp`, `log`, `sqrt`, `abs`.
//!
//! ```
//! use ddro::expr::Expr;
//! let e = Expr::parse("0.1 + 0.2*x1", 1, 0).unwrap();
//! assert!((e.eval(&[2.0], None).unwrap() - 0.5_f64).abs() < 1e-15);
//! ```

mod eval;
mod parse;

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("index out of range at offset {offset}: '{name}' (dimension {dim})")]
    IndexOutOfRange {
        offset: usize,
        name: String,
        dim: usize,
    },
}

impl ParseError {
    /// Byte offset into the source text.
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::IndexOutOfRange { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in {op} at offset {offset} (argument {arg})")]
    Domain {
        op: &'static str,
        offset: usize,
        arg: f64,
    },
    #[error("non-finite result of {op} at offset {offset}")]
    NonFinite { op: &'static str, offset: usize },
    #[error("expression expects {expected} {what} components, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("expression refers to the scenario but none was supplied")]
    MissingScenario,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone)]
pub enum NodeKind {
    Const(f64),
    /// 0-based decision component.
    Decision(usize),
    /// 0-based scenario component.
    Scenario(usize),
    Neg(Box<Node>),
    Call(Func, Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
}

/// Expression tree node; `offset` is the byte position of the node's
/// operator or leading token in the source.
#[derive(Debug, Clone)]
pub struct Node {
    pub kind: NodeKind,
    pub offset: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        use NodeKind::*;
        match (&self.kind, &other.kind) {
            (Const(a), Const(b)) => a.to_bits() == b.to_bits(),
            (Decision(a), Decision(b)) | (Scenario(a), Scenario(b)) => a == b,
            (Neg(a), Neg(b)) => a == b,
            (Call(f, a), Call(g, b)) => f == g && a == b,
            (Binary(o, a, b), Binary(p, c, d)) => o == p && a == c && b == d,
            _ => false,
        }
    }
}

/// A parsed expression over `n` decision and `d` scenario components.
#[derive(Debug, Clone)]
pub struct Expr {
    root: Node,
    source: String,
    n: usize,
    d: usize,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl Expr {
    /// Parses `text` with decision dimension `n` and scenario dimension `d`.
    pub fn parse(text: &str, n: usize, d: usize) -> Result<Self, ParseError> {
        let root = parse::parse(text, n, d)?;
        Ok(Self {
            root,
            source: text.to_string(),
            n,
            d,
        })
    }

    pub fn constant(v: f64) -> Self {
        Self {
            root: Node {
                kind: NodeKind::Const(v),
                offset: 0,
            },
            source: fmt_const(v),
            n: 0,
            d: 0,
        }
    }

    /// The scenario component `k` (0-based) as an expression.
    pub fn scenario_component(k: usize, d: usize) -> Self {
        Self {
            root: Node {
                kind: NodeKind::Scenario(k),
                offset: 0,
            },
            source: if d == 1 {
                "xi".into()
            } else {
                format!("xi{}", k + 1)
            },
            n: 0,
            d,
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Original text, or a printed form for built expressions.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn decision_dim(&self) -> usize {
        self.n
    }

    pub fn scenario_dim(&self) -> usize {
        self.d
    }

    pub fn uses_decision(&self) -> bool {
        any_node(&self.root, &|k| matches!(k, NodeKind::Decision(_)))
    }

    pub fn uses_scenario(&self) -> bool {
        any_node(&self.root, &|k| matches!(k, NodeKind::Scenario(_)))
    }

    /// The value when the expression has no variables at all.
    pub fn as_constant(&self) -> Option<f64> {
        if self.uses_decision() || self.uses_scenario() {
            return None;
        }
        self.eval::<f64>(&[], None).ok()
    }
}

fn any_node(node: &Node, pred: &dyn Fn(&NodeKind) -> bool) -> bool {
    if pred(&node.kind) {
        return true;
    }
    match &node.kind {
        NodeKind::Neg(a) | NodeKind::Call(_, a) => any_node(a, pred),
        NodeKind::Binary(_, a, b) => any_node(a, pred) || any_node(b, pred),
        _ => false,
    }
}

fn fmt_const(v: f64) -> String {
    // `{:?}` is the shortest representation that reads back exactly.
    if v < 0.0 {
        format!("(-{:?})", -v)
    } else {
        format!("{v:?}")
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            NodeKind::Const(v) => f.write_str(&fmt_const(*v)),
            NodeKind::Decision(j) => write!(f, "x{}", j + 1),
            NodeKind::Scenario(k) => write!(f, "xi{}", k + 1),
            NodeKind::Neg(a) => write!(f, "(-{a})"),
            NodeKind::Call(func, a) => write!(f, "{}({a})", func.name()),
            NodeKind::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

/// Prints a fully parenthesized form that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}
