use nalgebra::{DMatrix, DVector};

/// A point where an `abs` node was evaluated exactly at its kink.
#[derive(Debug, Clone, PartialEq)]
pub struct Kink {
    /// Printed subexpression whose argument vanished.
    pub node: String,
}

/// Value, gradient and Hessian of a scalar function at a point.
///
/// Every constructor fills the upper triangle of the Hessian and mirrors
/// it, so `hessian` is symmetric bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
    /// Non-differentiable points met while building the jet; the one-sided
    /// derivative there is reported as zero.
    pub kinks: Vec<Kink>,
}

fn symmetric(n: usize, entry: impl Fn(usize, usize) -> f64) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = entry(i, j);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

impl Jet {
    pub fn constant(value: f64, n: usize) -> Jet {
        Jet {
            value,
            gradient: DVector::zeros(n),
            hessian: DMatrix::zeros(n, n),
            kinks: Vec::new(),
        }
    }

    /// The `index`-th coordinate function.
    pub fn variable(value: f64, index: usize, n: usize) -> Jet {
        let mut j = Jet::constant(value, n);
        j.gradient[index] = 1.0;
        j
    }

    /// Builds a jet from raw parts, rejecting a Hessian that is not exactly
    /// symmetric or whose shape does not match the gradient.
    pub fn from_parts(
        value: f64,
        gradient: DVector<f64>,
        hessian: DMatrix<f64>,
    ) -> Result<Jet, String> {
        let n = gradient.len();
        if hessian.nrows() != n || hessian.ncols() != n {
            return Err(format!(
                "hessian is {}x{}, gradient has length {n}",
                hessian.nrows(),
                hessian.ncols()
            ));
        }
        for i in 0..n {
            for j in i + 1..n {
                if hessian[(i, j)].to_bits() != hessian[(j, i)].to_bits() {
                    return Err(format!("hessian not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(Jet {
            value,
            gradient,
            hessian,
            kinks: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    fn merged_kinks(&self, other: &Jet) -> Vec<Kink> {
        if other.kinks.is_empty() {
            self.kinks.clone()
        } else {
            let mut k = self.kinks.clone();
            k.extend(other.kinks.iter().cloned());
            k
        }
    }

    /// Composition with a scalar function given its value and first two
    /// derivatives at `self.value`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Jet {
        let g = &self.gradient;
        let h = &self.hessian;
        Jet {
            value: f0,
            gradient: g * f1,
            hessian: symmetric(self.dim(), |i, j| f1 * h[(i, j)] + f2 * g[i] * g[j]),
            kinks: self.kinks.clone(),
        }
    }

    pub fn neg(&self) -> Jet {
        self.chain(-self.value, -1.0, 0.0)
    }

    pub fn add(&self, other: &Jet) -> Jet {
        let (ha, hb) = (&self.hessian, &other.hessian);
        Jet {
            value: self.value + other.value,
            gradient: &self.gradient + &other.gradient,
            hessian: symmetric(self.dim(), |i, j| ha[(i, j)] + hb[(i, j)]),
            kinks: self.merged_kinks(other),
        }
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        let (ha, hb) = (&self.hessian, &other.hessian);
        Jet {
            value: self.value - other.value,
            gradient: &self.gradient - &other.gradient,
            hessian: symmetric(self.dim(), |i, j| ha[(i, j)] - hb[(i, j)]),
            kinks: self.merged_kinks(other),
        }
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let (a, b) = (self.value, other.value);
        let (ga, gb) = (&self.gradient, &other.gradient);
        let (ha, hb) = (&self.hessian, &other.hessian);
        Jet {
            value: a * b,
            gradient: ga * b + gb * a,
            hessian: symmetric(self.dim(), |i, j| {
                a * hb[(i, j)] + b * ha[(i, j)] + ga[i] * gb[j] + gb[i] * ga[j]
            }),
            kinks: self.merged_kinks(other),
        }
    }

    /// Quotient rule; the caller guarantees `other.value != 0`.
    pub fn div(&self, other: &Jet) -> Jet {
        let b = other.value;
        let q = self.value / b;
        let gb = &other.gradient;
        let gq = (&self.gradient - gb * q) / b;
        let (ha, hb) = (&self.hessian, &other.hessian);
        let hessian = symmetric(self.dim(), |i, j| {
            (ha[(i, j)] - q * hb[(i, j)] - gq[i] * gb[j] - gb[i] * gq[j]) / b
        });
        Jet {
            value: q,
            gradient: gq,
            hessian,
            kinks: self.merged_kinks(other),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.gradient.iter().all(|v| v.is_finite())
            && self.hessian.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_on_coordinates() {
        let x = Jet::variable(3.0, 0, 2);
        let y = Jet::variable(5.0, 1, 2);
        let p = x.mul(&y);
        assert_eq!(p.value, 15.0);
        assert_eq!(p.gradient.as_slice(), &[5.0, 3.0]);
        assert_eq!(p.hessian, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn quotient_matches_product_with_reciprocal() {
        let x = Jet::variable(1.5, 0, 2);
        let y = Jet::variable(-0.7, 1, 2);
        let q = x.mul(&y).div(&y.add(&Jet::constant(2.0, 2)));
        let recip = {
            let d = y.add(&Jet::constant(2.0, 2));
            let v = d.value;
            d.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
        };
        let r = x.mul(&y).mul(&recip);
        assert!((q.value - r.value).abs() < 1e-14);
        assert!((&q.gradient - &r.gradient).amax() < 1e-13);
        assert!((&q.hessian - &r.hessian).amax() < 1e-13);
    }

    #[test]
    fn from_parts_rejects_asymmetry() {
        let g = DVector::from_vec(vec![1.0, 2.0]);
        let h = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0 + 1e-15, 0.0]);
        assert!(Jet::from_parts(0.0, g.clone(), h).is_err());
        assert!(Jet::from_parts(0.0, g, DMatrix::zeros(3, 3)).is_err());
    }
}
