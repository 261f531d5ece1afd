use super::jet::{Jet, Kink};
use super::{BinaryOp, ExprError, Node, UnaryOp};

#[derive(Debug, Clone)]
enum BNode {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<BNode>),
    Binary(BinaryOp, Box<BNode>, Box<BNode>),
    /// `base ^ c` where the exponent subtree holds no variable.
    PowConst(Box<BNode>, f64, Box<BNode>),
}

/// An [`Expression`](super::Expression) whose variables have been resolved to
/// coordinates of an input vector. Immutable, `Send + Sync`.
#[derive(Debug, Clone)]
pub struct BoundExpression {
    root: BNode,
    inputs: Vec<String>,
}

fn fold_constant(node: &BNode) -> Option<f64> {
    match node {
        BNode::Const(c) => Some(*c),
        BNode::Var(_) => None,
        BNode::Unary(op, a) => unary_value(*op, fold_constant(a)?).ok(),
        BNode::Binary(op, a, b) => binary_value(*op, fold_constant(a)?, fold_constant(b)?).ok(),
        BNode::PowConst(a, c, _) => pow_value(fold_constant(a)?, *c).ok(),
    }
}

fn bind(node: &Node, inputs: &[String]) -> Result<BNode, ExprError> {
    Ok(match node {
        Node::Const(c) => BNode::Const(*c),
        Node::Var(name) => match inputs.iter().position(|s| s == name) {
            Some(i) => BNode::Var(i),
            None => {
                return Err(ExprError::UnknownIdentifier {
                    name: name.clone(),
                    at: None,
                })
            }
        },
        Node::Unary(op, a) => BNode::Unary(*op, Box::new(bind(a, inputs)?)),
        Node::Binary(BinaryOp::Pow, a, b) => {
            let base = bind(a, inputs)?;
            let exponent = bind(b, inputs)?;
            match fold_constant(&exponent) {
                Some(c) => BNode::PowConst(Box::new(base), c, Box::new(exponent)),
                None => BNode::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)),
            }
        }
        Node::Binary(op, a, b) => {
            BNode::Binary(*op, Box::new(bind(a, inputs)?), Box::new(bind(b, inputs)?))
        }
    })
}

// Errors from the scalar kernels carry only the offending value; the caller
// attaches the printed node.
fn unary_value(op: UnaryOp, u: f64) -> Result<f64, f64> {
    Ok(match op {
        UnaryOp::Neg => -u,
        UnaryOp::Exp => u.exp(),
        UnaryOp::Log if u > 0.0 => u.ln(),
        UnaryOp::Log => return Err(u),
        UnaryOp::Sin => u.sin(),
        UnaryOp::Cos => u.cos(),
        UnaryOp::Sqrt if u >= 0.0 => u.sqrt(),
        UnaryOp::Sqrt => return Err(u),
        UnaryOp::Abs => u.abs(),
    })
}

fn is_integer(c: f64) -> bool {
    c.fract() == 0.0 && c.abs() < 2f64.powi(31)
}

fn pow_value(u: f64, c: f64) -> Result<f64, f64> {
    if is_integer(c) {
        if u == 0.0 && c < 0.0 {
            return Err(u);
        }
        Ok(u.powi(c as i32))
    } else if u > 0.0 || (u == 0.0 && c > 0.0) {
        Ok(u.powf(c))
    } else {
        Err(u)
    }
}

fn binary_value(op: BinaryOp, a: f64, b: f64) -> Result<f64, f64> {
    Ok(match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div if b != 0.0 => a / b,
        BinaryOp::Div => return Err(b),
        BinaryOp::Pow if a > 0.0 => a.powf(b),
        BinaryOp::Pow => return Err(a),
    })
}

/// Value and first two derivatives of `u^c` for a constant exponent.
fn pow_derivatives(u: f64, c: f64) -> Result<(f64, f64, f64), f64> {
    if is_integer(c) {
        let k = c as i32;
        match k {
            0 => Ok((1.0, 0.0, 0.0)),
            1 => Ok((u, 1.0, 0.0)),
            _ if u == 0.0 && k < 0 => Err(u),
            _ => Ok((u.powi(k), c * u.powi(k - 1), c * (c - 1.0) * u.powi(k - 2))),
        }
    } else if u > 0.0 || (u == 0.0 && c > 2.0) {
        Ok((u.powf(c), c * u.powf(c - 1.0), c * (c - 1.0) * u.powf(c - 2.0)))
    } else {
        Err(u)
    }
}

impl BoundExpression {
    pub(super) fn new<S: AsRef<str>>(node: &Node, inputs: &[S]) -> Result<Self, ExprError> {
        let inputs: Vec<String> = inputs.iter().map(|s| s.as_ref().to_owned()).collect();
        Ok(BoundExpression {
            root: bind(node, &inputs)?,
            inputs,
        })
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn dim(&self) -> usize {
        self.inputs.len()
    }

    /// The expression as an AST over the input names.
    pub fn to_node(&self) -> Node {
        self.unbind(&self.root)
    }

    fn unbind(&self, n: &BNode) -> Node {
        match n {
            BNode::Const(c) => Node::Const(*c),
            BNode::Var(i) => Node::Var(self.inputs[*i].clone()),
            BNode::Unary(op, a) => Node::unary(*op, self.unbind(a)),
            BNode::Binary(op, a, b) => Node::binary(*op, self.unbind(a), self.unbind(b)),
            BNode::PowConst(a, _, e) => Node::binary(BinaryOp::Pow, self.unbind(a), self.unbind(e)),
        }
    }

    fn domain(&self, n: &BNode, value: f64) -> ExprError {
        ExprError::Domain {
            node: self.unbind(n).to_string(),
            value,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<(), ExprError> {
        if x.len() != self.inputs.len() {
            return Err(ExprError::PointDimension {
                expected: self.inputs.len(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Value only. Domain rules: `log` needs a positive argument, `sqrt` a
    /// non-negative one, divisors must be non-zero and a non-integer or
    /// variable exponent needs a positive base.
    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        self.check_point(x)?;
        let v = self.eval_node(&self.root, x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.domain(&self.root, v))
        }
    }

    fn eval_node(&self, n: &BNode, x: &[f64]) -> Result<f64, ExprError> {
        match n {
            BNode::Const(c) => Ok(*c),
            BNode::Var(i) => Ok(x[*i]),
            BNode::Unary(op, a) => {
                let u = self.eval_node(a, x)?;
                unary_value(*op, u).map_err(|v| self.domain(n, v))
            }
            BNode::Binary(op, a, b) => {
                let u = self.eval_node(a, x)?;
                let w = self.eval_node(b, x)?;
                binary_value(*op, u, w).map_err(|v| self.domain(n, v))
            }
            BNode::PowConst(a, c, _) => {
                let u = self.eval_node(a, x)?;
                pow_value(u, *c).map_err(|v| self.domain(n, v))
            }
        }
    }

    /// Exact value, gradient and Hessian by forward second-order rules.
    ///
    /// On top of the [`eval`](Self::eval) domain, `sqrt` needs a strictly
    /// positive argument and a non-integer constant exponent `c < 2` needs a
    /// strictly positive base. `abs` at exactly zero is not an error: the
    /// point is recorded in [`Jet::kinks`] and the derivative taken as zero.
    pub fn jet(&self, x: &[f64]) -> Result<Jet, ExprError> {
        self.check_point(x)?;
        let j = self.jet_node(&self.root, x)?;
        if j.is_finite() {
            Ok(j)
        } else {
            Err(self.domain(&self.root, j.value))
        }
    }

    fn jet_node(&self, n: &BNode, x: &[f64]) -> Result<Jet, ExprError> {
        let dim = x.len();
        match n {
            BNode::Const(c) => Ok(Jet::constant(*c, dim)),
            BNode::Var(i) => Ok(Jet::variable(x[*i], *i, dim)),
            BNode::Unary(op, a) => {
                let ja = self.jet_node(a, x)?;
                let u = ja.value;
                Ok(match op {
                    UnaryOp::Neg => ja.neg(),
                    UnaryOp::Exp => {
                        let e = u.exp();
                        ja.chain(e, e, e)
                    }
                    UnaryOp::Log => {
                        if u <= 0.0 {
                            return Err(self.domain(n, u));
                        }
                        ja.chain(u.ln(), 1.0 / u, -1.0 / (u * u))
                    }
                    UnaryOp::Sin => ja.chain(u.sin(), u.cos(), -u.sin()),
                    UnaryOp::Cos => ja.chain(u.cos(), -u.sin(), -u.cos()),
                    UnaryOp::Sqrt => {
                        if u <= 0.0 {
                            return Err(self.domain(n, u));
                        }
                        let s = u.sqrt();
                        ja.chain(s, 0.5 / s, -0.25 / (s * u))
                    }
                    UnaryOp::Abs => {
                        if u == 0.0 {
                            let mut j = ja.chain(0.0, 0.0, 0.0);
                            j.kinks.push(Kink {
                                node: self.unbind(n).to_string(),
                            });
                            j
                        } else {
                            let s = u.signum();
                            ja.chain(u.abs(), s, 0.0)
                        }
                    }
                })
            }
            BNode::Binary(op, a, b) => {
                let ja = self.jet_node(a, x)?;
                let jb = self.jet_node(b, x)?;
                Ok(match op {
                    BinaryOp::Add => ja.add(&jb),
                    BinaryOp::Sub => ja.sub(&jb),
                    BinaryOp::Mul => ja.mul(&jb),
                    BinaryOp::Div => {
                        if jb.value == 0.0 {
                            return Err(self.domain(n, 0.0));
                        }
                        ja.div(&jb)
                    }
                    BinaryOp::Pow => {
                        // a^b = exp(b log a) for a variable exponent.
                        let u = ja.value;
                        if u <= 0.0 {
                            return Err(self.domain(n, u));
                        }
                        let log_a = ja.chain(u.ln(), 1.0 / u, -1.0 / (u * u));
                        let p = log_a.mul(&jb);
                        let e = p.value.exp();
                        let mut j = p.chain(e, e, e);
                        j.value = u.powf(jb.value);
                        j
                    }
                })
            }
            BNode::PowConst(a, c, _) => {
                let ja = self.jet_node(a, x)?;
                let (f0, f1, f2) =
                    pow_derivatives(ja.value, *c).map_err(|v| self.domain(n, v))?;
                Ok(ja.chain(f0, f1, f2))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expression;
    use nalgebra::DMatrix;

    fn bound(src: &str, vars: &[&str]) -> BoundExpression {
        Expression::parse(src).unwrap().bind(vars).unwrap()
    }

    #[test]
    fn bilinear_jet() {
        let j = bound("x*y", &["x", "y"]).jet(&[3.0, 5.0]).unwrap();
        assert_eq!(j.value, 15.0);
        assert_eq!(j.gradient.as_slice(), &[5.0, 3.0]);
        assert_eq!(j.hessian, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn monomial_jet() {
        let j = bound("x^2", &["x"]).jet(&[2.0]).unwrap();
        assert_eq!(j.value, 4.0);
        assert_eq!(j.gradient[0], 4.0);
        assert_eq!(j.hessian[(0, 0)], 2.0);
    }

    #[test]
    fn exp_plus_log_jet() {
        let j = bound("exp(x)+log(y)", &["x", "y"]).jet(&[0.0, 1.0]).unwrap();
        assert_eq!(j.value, 1.0);
        assert_eq!(j.gradient.as_slice(), &[1.0, 1.0]);
        assert_eq!(j.hessian, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
    }

    #[test]
    fn domain_violations_name_the_node() {
        let e = bound("1 + log(x - 1)", &["x"]);
        match e.jet(&[0.5]) {
            Err(ExprError::Domain { node, value }) => {
                assert_eq!(node, "log(x - 1)");
                assert_eq!(value, -0.5);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(bound("1/x", &["x"]).eval(&[0.0]).is_err());
        assert!(bound("sqrt(x)", &["x"]).eval(&[0.0]).is_ok());
        assert!(bound("sqrt(x)", &["x"]).jet(&[0.0]).is_err());
        assert!(bound("x^0.5", &["x"]).eval(&[-1.0]).is_err());
        assert!(bound("x^y", &["x", "y"]).jet(&[-1.0, 2.0]).is_err());
        assert!(bound("exp(x)", &["x"]).eval(&[1000.0]).is_err());
    }

    #[test]
    fn abs_kink_is_flagged_not_fatal() {
        let e = bound("abs(x) + y", &["x", "y"]);
        let j = e.jet(&[0.0, 1.0]).unwrap();
        assert_eq!(j.gradient.as_slice(), &[0.0, 1.0]);
        assert_eq!(j.kinks.len(), 1);
        assert_eq!(j.kinks[0].node, "abs(x)");
        let j = e.jet(&[-2.0, 1.0]).unwrap();
        assert_eq!(j.gradient.as_slice(), &[-1.0, 1.0]);
        assert!(j.kinks.is_empty());
    }

    #[test]
    fn integer_powers_of_negative_bases() {
        let j = bound("x^3", &["x"]).jet(&[-2.0]).unwrap();
        assert_eq!((j.value, j.gradient[0], j.hessian[(0, 0)]), (-8.0, 12.0, -12.0));
        let j = bound("x^(1+1)", &["x"]).jet(&[0.0]).unwrap();
        assert_eq!((j.value, j.gradient[0], j.hessian[(0, 0)]), (0.0, 0.0, 2.0));
        let j = bound("x^-1", &["x"]).jet(&[2.0]).unwrap();
        assert_eq!((j.value, j.gradient[0], j.hessian[(0, 0)]), (0.5, -0.25, 0.25));
    }

    #[test]
    fn variable_exponent() {
        // d/dx x^y = y x^(y-1), d/dy = x^y ln x
        let j = bound("x^y", &["x", "y"]).jet(&[2.0, 3.0]).unwrap();
        assert!((j.value - 8.0).abs() < 1e-15);
        assert!((j.gradient[0] - 12.0).abs() < 1e-12);
        assert!((j.gradient[1] - 8.0 * 2f64.ln()).abs() < 1e-12);
        assert!((j.hessian[(0, 0)] - 12.0).abs() < 1e-12);
        // d2/dxdy = x^(y-1) (1 + y ln x)
        assert!((j.hessian[(0, 1)] - 4.0 * (1.0 + 3.0 * 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn unbound_variable_and_bad_point() {
        let e = Expression::parse("x + q").unwrap();
        assert!(matches!(
            e.bind(&["x"]),
            Err(ExprError::UnknownIdentifier { at: None, .. })
        ));
        let b = bound("x", &["x", "y"]);
        assert!(matches!(b.eval(&[1.0]), Err(ExprError::PointDimension { .. })));
    }
}
