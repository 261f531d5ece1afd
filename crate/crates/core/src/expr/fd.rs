use nalgebra::{DMatrix, DVector};

use super::jet::Jet;

/// Default central-difference step for first derivatives along a
/// coordinate: `eps^(1/3) * max(1, |x|)`.
pub fn gradient_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

/// Default step for second derivatives: `eps^(1/4) * max(1, |x|)`.
pub fn hessian_step(x: f64) -> f64 {
    f64::EPSILON.powf(0.25) * x.abs().max(1.0)
}

/// Central-difference jet of `f` at `point`.
///
/// With `step = None` the per-coordinate defaults of [`gradient_step`] and
/// [`hessian_step`] are used; a fixed `step` applies to every coordinate and
/// both orders. Gradient and Hessian are both `O(step^2)` accurate. Only the
/// upper triangle is differenced, so the result is exactly symmetric.
pub fn finite_difference_jet<F, E>(f: F, point: &[f64], step: Option<f64>) -> Result<Jet, E>
where
    F: Fn(&[f64]) -> Result<f64, E>,
{
    let n = point.len();
    let mut x = point.to_vec();
    let f0 = f(&x)?;
    let hg: Vec<f64> = point
        .iter()
        .map(|&v| step.unwrap_or_else(|| gradient_step(v)))
        .collect();
    let hh: Vec<f64> = point
        .iter()
        .map(|&v| step.unwrap_or_else(|| hessian_step(v)))
        .collect();

    let eval_at = |x: &mut Vec<f64>, moves: &[(usize, f64)]| -> Result<f64, E> {
        for &(i, d) in moves {
            x[i] += d;
        }
        let v = f(x);
        x.copy_from_slice(point);
        v
    };

    let mut gradient = DVector::zeros(n);
    for i in 0..n {
        let fp = eval_at(&mut x, &[(i, hg[i])])?;
        let fm = eval_at(&mut x, &[(i, -hg[i])])?;
        gradient[i] = (fp - fm) / (2.0 * hg[i]);
    }

    let mut hessian = DMatrix::zeros(n, n);
    for i in 0..n {
        let hi = hh[i];
        let fp = eval_at(&mut x, &[(i, hi)])?;
        let fm = eval_at(&mut x, &[(i, -hi)])?;
        hessian[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in i + 1..n {
            let hj = hh[j];
            let fpp = eval_at(&mut x, &[(i, hi), (j, hj)])?;
            let fpm = eval_at(&mut x, &[(i, hi), (j, -hj)])?;
            let fmp = eval_at(&mut x, &[(i, -hi), (j, hj)])?;
            let fmm = eval_at(&mut x, &[(i, -hi), (j, -hj)])?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            hessian[(i, j)] = v;
            hessian[(j, i)] = v;
        }
    }

    Ok(Jet {
        value: f0,
        gradient,
        hessian,
        kinks: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    type R = Result<f64, ()>;

    #[test]
    fn square_with_fixed_step() {
        let j = finite_difference_jet(|x: &[f64]| -> R { Ok(x[0] * x[0]) }, &[2.0], Some(1e-4))
            .unwrap();
        assert!((j.gradient[0] - 4.0).abs() < 1e-7);
        assert!((j.hessian[(0, 0)] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn constant_function_has_zero_derivatives() {
        let j = finite_difference_jet(|_: &[f64]| -> R { Ok(7.0) }, &[0.3, -1.0], None).unwrap();
        assert_eq!(j.value, 7.0);
        assert!(j.gradient.iter().all(|&v| v == 0.0));
        assert!(j.hessian.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bilinear_cross_term() {
        let j = finite_difference_jet(|x: &[f64]| -> R { Ok(x[0] * x[1]) }, &[3.0, 5.0], Some(1e-4))
            .unwrap();
        assert!((j.hessian[(0, 1)] - 1.0).abs() < 1e-6);
        assert_eq!(j.hessian[(0, 1)].to_bits(), j.hessian[(1, 0)].to_bits());
    }

    #[test]
    fn stencil_failure_propagates() {
        let r = finite_difference_jet(
            |x: &[f64]| if x[0] > 0.0 { Ok(x[0].ln()) } else { Err("log of non-positive") },
            &[1e-12],
            None,
        );
        assert_eq!(r.unwrap_err(), "log of non-positive");
    }
}
