//! Random expressions that stay inside their domain on `[-1.5, 1.5]^n`,
//! and rewrites that preserve their value everywhere.

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use errcalc::expr::{BinaryOp, Node, UnaryOp};
use rand::Rng;

pub const VARS: [&str; 3] = ["a", "b", "c"];

fn c(v: f64) -> Node {
    if v < 0.0 {
        Node::unary(UnaryOp::Neg, Node::constant(-v))
    } else {
        Node::constant(v)
    }
}

fn un(op: UnaryOp, a: Node) -> Node {
    Node::unary(op, a)
}

fn bin(op: BinaryOp, a: Node, b: Node) -> Node {
    Node::binary(op, a, b)
}

fn one_plus_square(a: Node) -> Node {
    bin(BinaryOp::Add, c(1.0), bin(BinaryOp::Pow, a, c(2.0)))
}

/// A random expression over the first `nvars` of [`VARS`].
pub fn random_node<R: Rng>(rng: &mut R, nvars: usize, depth: u32) -> Node {
    if depth == 0 || rng.random_bool(0.2) {
        return if rng.random_bool(0.75) {
            Node::var(VARS[rng.random_range(0..nvars)])
        } else {
            c((rng.random_range(-200..=200) as f64) / 100.0)
        };
    }
    let sub = |rng: &mut R| random_node(rng, nvars, depth - 1);
    match rng.random_range(0..12) {
        0 => bin(BinaryOp::Add, sub(rng), sub(rng)),
        1 => bin(BinaryOp::Sub, sub(rng), sub(rng)),
        2 | 3 => bin(BinaryOp::Mul, sub(rng), sub(rng)),
        4 => un(UnaryOp::Sin, sub(rng)),
        5 => un(UnaryOp::Cos, sub(rng)),
        6 => un(UnaryOp::Exp, un(UnaryOp::Sin, sub(rng))),
        7 => un(UnaryOp::Log, one_plus_square(sub(rng))),
        8 => un(UnaryOp::Sqrt, one_plus_square(sub(rng))),
        9 => bin(
            BinaryOp::Div,
            sub(rng),
            bin(BinaryOp::Add, c(2.0), un(UnaryOp::Cos, sub(rng))),
        ),
        10 => bin(BinaryOp::Pow, sub(rng), c(rng.random_range(2..=3) as f64)),
        _ => un(UnaryOp::Neg, sub(rng)),
    }
}

/// A random point in `[-1.5, 1.5]^n`.
pub fn random_point<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()
}

fn half(a: Node) -> Node {
    bin(BinaryOp::Div, a, c(2.0))
}

/// An algebraically equal form of `node`. Domain-sensitive rewrites are
/// applied only where the generator guarantees a positive argument.
pub fn rewrite<R: Rng>(rng: &mut R, node: &Node) -> Node {
    let inner = match node {
        Node::Const(_) | Node::Var(_) => node.clone(),
        Node::Unary(op, a) => un(*op, rewrite(rng, a)),
        Node::Binary(op, a, b) => bin(*op, rewrite(rng, a), rewrite(rng, b)),
    };
    if !rng.random_bool(0.5) {
        return inner;
    }
    match inner {
        Node::Var(_) => bin(BinaryOp::Sub, bin(BinaryOp::Add, inner, c(1.0)), c(1.0)),
        Node::Binary(BinaryOp::Add, a, b) => bin(BinaryOp::Add, *b, *a),
        Node::Binary(BinaryOp::Mul, a, b) => match *b {
            Node::Binary(BinaryOp::Add, p, q) => bin(
                BinaryOp::Add,
                bin(BinaryOp::Mul, (*a).clone(), *p),
                bin(BinaryOp::Mul, *a, *q),
            ),
            other => bin(BinaryOp::Mul, other, *a),
        },
        Node::Binary(BinaryOp::Sub, a, b) => {
            bin(BinaryOp::Add, *a, bin(BinaryOp::Mul, c(-1.0), *b))
        }
        Node::Binary(BinaryOp::Div, a, b) => {
            bin(BinaryOp::Mul, *a, bin(BinaryOp::Div, c(1.0), *b))
        }
        Node::Binary(BinaryOp::Pow, a, e) if *e == Node::Const(2.0) => {
            bin(BinaryOp::Mul, (*a).clone(), *a)
        }
        Node::Binary(BinaryOp::Pow, a, e) if *e == Node::Const(3.0) => bin(
            BinaryOp::Mul,
            bin(BinaryOp::Pow, (*a).clone(), c(2.0)),
            *a,
        ),
        Node::Unary(UnaryOp::Sin, a) => bin(
            BinaryOp::Mul,
            bin(BinaryOp::Mul, c(2.0), un(UnaryOp::Sin, half((*a).clone()))),
            un(UnaryOp::Cos, half(*a)),
        ),
        Node::Unary(UnaryOp::Cos, a) => {
            un(UnaryOp::Sin, bin(BinaryOp::Add, *a, c(FRAC_PI_2)))
        }
        Node::Unary(UnaryOp::Exp, a) => bin(
            BinaryOp::Mul,
            un(UnaryOp::Exp, half((*a).clone())),
            un(UnaryOp::Exp, half(*a)),
        ),
        Node::Unary(UnaryOp::Log, a) => {
            bin(BinaryOp::Mul, c(2.0), un(UnaryOp::Log, un(UnaryOp::Sqrt, *a)))
        }
        Node::Unary(UnaryOp::Sqrt, a) => un(
            UnaryOp::Exp,
            bin(BinaryOp::Mul, c(0.5), un(UnaryOp::Log, *a)),
        ),
        Node::Unary(UnaryOp::Neg, a) => bin(BinaryOp::Mul, c(-1.0), *a),
        other => other,
    }
}
