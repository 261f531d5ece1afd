//! Model expression language.
//!
//! Expressions are parsed into a plain AST ([`Expression`]), bound to an
//! ordered variable list ([`BoundExpression`]) and then evaluated either for
//! their value alone or as a [`Jet`] carrying the exact gradient and Hessian.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | base ('^' factor)?
//! base   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! reads as `-(x^2)` and `x^2^3` as `x^(2^3)`.

mod bound;
mod fd;
mod jet;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub use bound::BoundExpression;
pub use fd::{finite_difference_jet, gradient_step, hessian_step};
pub use jet::{Jet, Kink};

/// Line/column of a token in the source text (both 1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

fn at_suffix(at: &Option<Position>) -> String {
    match at {
        Some(p) => format!(" at {p}"),
        None => String::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at {at}: {message}")]
    Syntax { at: Position, message: String },
    #[error("unknown identifier `{name}`{}", at_suffix(.at))]
    UnknownIdentifier { name: String, at: Option<Position> },
    #[error("`{name}` takes {expected} argument(s), found {found} at {at}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        at: Position,
    },
    #[error("domain violation in `{node}`: offending value {value}")]
    Domain { node: String, value: f64 },
    #[error("point has {found} coordinates, expected {expected}")]
    PointDimension { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl UnaryOp {
    pub const FUNCTIONS: [UnaryOp; 6] = [
        UnaryOp::Exp,
        UnaryOp::Log,
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Sqrt,
        UnaryOp::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<UnaryOp> {
        UnaryOp::FUNCTIONS.into_iter().find(|op| op.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

/// AST node. Constants produced by the parser are always finite and
/// non-negative; negation is an explicit [`UnaryOp::Neg`] node.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(String),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

impl Node {
    pub fn constant(c: f64) -> Node {
        Node::Const(c)
    }

    pub fn var(name: impl Into<String>) -> Node {
        Node::Var(name.into())
    }

    pub fn unary(op: UnaryOp, arg: Node) -> Node {
        Node::Unary(op, Box::new(arg))
    }

    pub fn binary(op: BinaryOp, lhs: Node, rhs: Node) -> Node {
        Node::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Node::Const(_) => {}
            Node::Var(name) => {
                out.insert(name);
            }
            Node::Unary(_, a) => a.collect_vars(out),
            Node::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Replaces every variable by the node returned from `f`.
    pub fn substitute(&self, f: &impl Fn(&str) -> Option<Node>) -> Node {
        match self {
            Node::Const(c) => Node::Const(*c),
            Node::Var(name) => f(name).unwrap_or_else(|| Node::Var(name.clone())),
            Node::Unary(op, a) => Node::unary(*op, a.substitute(f)),
            Node::Binary(op, a, b) => Node::binary(*op, a.substitute(f), b.substitute(f)),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Node::Const(_) | Node::Var(_) => 1,
            Node::Unary(_, a) => 1 + a.node_count(),
            Node::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    // Binding strength used by the printer: atoms and calls 5, `^` 4,
    // unary minus 3, `*` `/` 2, `+` `-` 1.
    fn precedence(&self) -> u8 {
        match self {
            Node::Const(_) | Node::Var(_) => 5,
            Node::Unary(UnaryOp::Neg, _) => 3,
            Node::Unary(_, _) => 5,
            Node::Binary(BinaryOp::Pow, _, _) => 4,
            Node::Binary(BinaryOp::Mul | BinaryOp::Div, _, _) => 2,
            Node::Binary(BinaryOp::Add | BinaryOp::Sub, _, _) => 1,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var(name) => f.write_str(name),
            Node::Unary(UnaryOp::Neg, a) => {
                f.write_str("-")?;
                a.fmt_child(f, a.precedence() < 3)
            }
            Node::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Node::Binary(BinaryOp::Pow, a, b) => {
                a.fmt_child(f, a.precedence() < 5)?;
                f.write_str("^")?;
                b.fmt_child(f, b.precedence() < 3)
            }
            Node::Binary(op, a, b) => {
                let p = self.precedence();
                a.fmt_child(f, a.precedence() < p)?;
                write!(f, " {} ", op.symbol())?;
                b.fmt_child(f, b.precedence() <= p)
            }
        }
    }
}

/// A parsed model expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
}

impl Expression {
    pub fn parse(source: &str) -> Result<Expression, ExprError> {
        parse::parse(source).map(|root| Expression { root })
    }

    /// Parses and checks that every identifier is one of `declared`.
    pub fn parse_declared<S: AsRef<str>>(
        source: &str,
        declared: &[S],
    ) -> Result<Expression, ExprError> {
        let root = parse::parse_checked(source, Some(declared))?;
        Ok(Expression { root })
    }

    pub fn from_node(root: Node) -> Expression {
        Expression { root }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn into_node(self) -> Node {
        self.root
    }

    pub fn variables(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.root.collect_vars(&mut out);
        out
    }

    /// Resolves variable names against `inputs`; the position of a name in
    /// `inputs` is its coordinate in evaluation points.
    pub fn bind<S: AsRef<str>>(&self, inputs: &[S]) -> Result<BoundExpression, ExprError> {
        BoundExpression::new(&self.root, inputs)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl std::str::FromStr for Expression {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expression::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printer_uses_minimal_parentheses() {
        for src in [
            "2 * x + sin(y)",
            "x^2^3",
            "(x^2)^3",
            "-x^2",
            "(-x)^2",
            "x - (y - z)",
            "x - y - z",
            "x / (y * z)",
            "2^-x",
            "x * -y",
            "--x",
            "exp(x + 1) / log(y)",
        ] {
            let e = Expression::parse(src).unwrap();
            assert_eq!(e.to_string(), src);
        }
    }

    #[test]
    fn substitution_replaces_variables() {
        let e = Expression::parse("u + u * v").unwrap();
        let s = e.root().substitute(&|name| match name {
            "u" => Some(Node::binary(BinaryOp::Add, Node::var("x"), Node::Const(1.0))),
            _ => None,
        });
        assert_eq!(s.to_string(), "x + 1 + (x + 1) * v");
    }

    #[test]
    fn variables_are_collected_sorted() {
        let e = Expression::parse("z * exp(a) + a").unwrap();
        assert_eq!(e.variables().into_iter().collect::<Vec<_>>(), ["a", "z"]);
    }
}
