use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expression;

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar test function with its first two derivatives.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    value: Scalar,
    d1: Scalar,
    d2: Scalar,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("TestFunction").field(&self.name).finish()
    }
}

impl TestFunction {
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TestFunction {
            name: name.into(),
            value: Arc::new(value),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
        }
    }

    pub fn constant(c: f64) -> Self {
        TestFunction::new(format!("{c}"), move |_| c, |_| 0.0, |_| 0.0)
    }

    /// `y^k`.
    pub fn monomial(k: u32) -> Self {
        let name = match k {
            0 => "1".to_string(),
            1 => "y".to_string(),
            _ => format!("y^{k}"),
        };
        let kf = k as f64;
        TestFunction::new(
            name,
            move |y| y.powi(k as i32),
            move |y| if k == 0 { 0.0 } else { kf * y.powi(k as i32 - 1) },
            move |y| {
                if k < 2 {
                    0.0
                } else {
                    kf * (kf - 1.0) * y.powi(k as i32 - 2)
                }
            },
        )
    }

    /// Smooth bump `exp(1 - 1/(1 - (y/w)^2))` on `|y| < w`, zero outside,
    /// equal to 1 at the origin.
    pub fn bump(width: f64) -> Self {
        let w = width;
        let parts = move |y: f64| -> Option<(f64, f64, f64)> {
            let u = y / w;
            let q = 1.0 - u * u;
            if q <= 0.0 {
                return None;
            }
            Some((u, q, (1.0 - 1.0 / q).exp()))
        };
        TestFunction::new(
            format!("bump({w})"),
            move |y| parts(y).map_or(0.0, |(_, _, p)| p),
            move |y| parts(y).map_or(0.0, |(u, q, p)| -2.0 * u / (w * q * q) * p),
            move |y| {
                parts(y).map_or(0.0, |(u, q, p)| {
                    let s = -2.0 * u / (w * q * q);
                    let ds = -2.0 / (w * w) * (1.0 / (q * q) + 4.0 * u * u / (q * q * q));
                    p * (s * s + ds)
                })
            },
        )
    }

    /// Parses a function of the single variable `y`. Evaluation outside the
    /// expression's domain yields NaN, reported later as a non-finite sample.
    pub fn from_expression(src: &str) -> Result<Self> {
        let e = Expression::parse_declared(src, &["y"])?;
        let bound = e.bind(&["y"])?;
        let (b0, b1, b2) = (bound.clone(), bound.clone(), bound);
        Ok(TestFunction::new(
            e.to_string(),
            move |y| b0.eval(&[y]).unwrap_or(f64::NAN),
            move |y| b1.jet(&[y]).map_or(f64::NAN, |j| j.gradient[0]),
            move |y| b2.jet(&[y]).map_or(f64::NAN, |j| j.hessian[(0, 0)]),
        ))
    }

    /// Pointwise product, derivatives by the Leibniz rule.
    pub fn product(&self, other: &TestFunction) -> Self {
        let (a, b) = (self.clone(), other.clone());
        let (c, d) = (self.clone(), other.clone());
        let (e, f) = (self.clone(), other.clone());
        TestFunction::new(
            format!("({})*({})", self.name, other.name),
            move |y| a.value(y) * b.value(y),
            move |y| c.d1(y) * d.value(y) + c.value(y) * d.d1(y),
            move |y| {
                e.d2(y) * f.value(y) + 2.0 * e.d1(y) * f.d1(y) + e.value(y) * f.d2(y)
            },
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    #[inline]
    pub fn value(&self, y: f64) -> f64 {
        (self.value)(y)
    }

    #[inline]
    pub fn d1(&self, y: f64) -> f64 {
        (self.d1)(y)
    }

    #[inline]
    pub fn d2(&self, y: f64) -> f64 {
        (self.d2)(y)
    }
}

/// Named collection of test functions.
#[derive(Debug, Clone)]
pub struct TestFunctionBank {
    functions: Vec<TestFunction>,
}

impl Default for TestFunctionBank {
    /// `1, y, y², y³` and a bump of half-width 2.
    fn default() -> Self {
        TestFunctionBank {
            functions: vec![
                TestFunction::monomial(0),
                TestFunction::monomial(1),
                TestFunction::monomial(2),
                TestFunction::monomial(3),
                TestFunction::bump(2.0),
            ],
        }
    }
}

impl TestFunctionBank {
    pub fn new(functions: Vec<TestFunction>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::InvalidConfig("empty test-function bank".into()));
        }
        for (i, f) in functions.iter().enumerate() {
            if functions[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate test function {}",
                    f.name
                )));
            }
        }
        Ok(TestFunctionBank { functions })
    }

    pub fn push(&mut self, f: TestFunction) -> Result<()> {
        if self.get(f.name()).is_some() {
            return Err(Error::InvalidConfig(format!(
                "duplicate test function {}",
                f.name
            )));
        }
        self.functions.push(f);
        Ok(())
    }

    pub fn functions(&self) -> &[TestFunction] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&TestFunction> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_derivatives(f: &TestFunction, points: &[f64]) {
        for &y in points {
            let h = 1e-5;
            let d1 = (f.value(y + h) - f.value(y - h)) / (2.0 * h);
            let d2 = (f.d1(y + h) - f.d1(y - h)) / (2.0 * h);
            assert!((d1 - f.d1(y)).abs() < 1e-6, "{} d1 at {y}", f.name());
            assert!((d2 - f.d2(y)).abs() < 1e-5, "{} d2 at {y}", f.name());
        }
    }

    #[test]
    fn bank_derivatives_are_consistent() {
        let pts = [-1.7, -0.6, 0.0, 0.3, 1.2, 1.9];
        for f in TestFunctionBank::default().functions() {
            check_derivatives(f, &pts);
        }
        let bump = TestFunction::bump(2.0);
        assert_eq!(bump.value(0.0), 1.0);
        assert_eq!(bump.value(2.5), 0.0);
    }

    #[test]
    fn products_and_expressions() {
        let p = TestFunction::monomial(2).product(&TestFunction::bump(1.5));
        check_derivatives(&p, &[-1.0, 0.2, 0.9]);
        let e = TestFunction::from_expression("sin(y) * y").unwrap();
        check_derivatives(&e, &[-1.0, 0.5, 2.0]);
        assert!(TestFunction::from_expression("x + 1").is_err());
        assert!(TestFunction::from_expression("log(y)").unwrap().value(-1.0).is_nan());
    }

    #[test]
    fn bank_rejects_duplicates() {
        let mut bank = TestFunctionBank::default();
        assert_eq!(bank.len(), 5);
        assert!(bank.push(TestFunction::monomial(2)).is_err());
        assert!(bank.get("y^3").is_some());
        assert!(TestFunctionBank::new(vec![]).is_err());
    }
}
