mod support;

use errcalc::expr::{finite_difference_jet, hessian_step, BoundExpression, Expression, Jet};
use errcalc::rng::substream;
use proptest::prelude::*;
use support::{random_node, random_point, rewrite, VARS};

fn case(seed: u64) -> (Expression, Vec<f64>, usize) {
    let mut rng = substream(seed, 0);
    let nvars = 1 + (seed % 3) as usize;
    let node = random_node(&mut rng, nvars, 4);
    let point = random_point(&mut rng, nvars);
    (Expression::from_node(node), point, nvars)
}

// Richardson-extrapolated central differences, fourth-order accurate.
fn reference_jet(bound: &BoundExpression, point: &[f64]) -> Jet {
    let h = hessian_step(1.5);
    let coarse = finite_difference_jet(|x| bound.eval(x), point, Some(h)).unwrap();
    let fine = finite_difference_jet(|x| bound.eval(x), point, Some(h / 2.0)).unwrap();
    Jet {
        value: fine.value,
        gradient: (fine.gradient * 4.0 - coarse.gradient) / 3.0,
        hessian: (fine.hessian * 4.0 - coarse.hessian) / 3.0,
        kinks: Vec::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn jets_agree_with_finite_differences(seed in any::<u64>()) {
        let (e, point, n) = case(seed);
        let bound = e.bind(&VARS[..n]).unwrap();
        let jet = bound.jet(&point).unwrap();
        let fd = reference_jet(&bound, &point);
        let scale = 1.0 + jet.value.abs() + jet.gradient.amax() + jet.hessian.amax();
        prop_assert!((jet.value - fd.value).abs() <= 1e-12 * scale);
        for i in 0..n {
            prop_assert!((jet.gradient[i] - fd.gradient[i]).abs() <= 1e-6 * scale,
                "{e}: d{i} {} vs {}", jet.gradient[i], fd.gradient[i]);
            for j in 0..n {
                prop_assert!((jet.hessian[(i, j)] - fd.hessian[(i, j)]).abs() <= 1e-4 * scale,
                    "{e}: d{i}{j} {} vs {}", jet.hessian[(i, j)], fd.hessian[(i, j)]);
            }
        }
    }

    #[test]
    fn printing_then_parsing_is_the_identity(seed in any::<u64>()) {
        let (e, _, _) = case(seed);
        let printed = e.to_string();
        let back = Expression::parse(&printed).unwrap();
        prop_assert_eq!(back.root(), e.root(), "{}", printed);
        prop_assert_eq!(back.to_string(), printed);
    }

    #[test]
    fn rewrites_preserve_values(seed in any::<u64>()) {
        let (e, point, n) = case(seed);
        let mut rng = substream(seed, 1);
        let r = Expression::from_node(rewrite(&mut rng, e.root()));
        let a = e.bind(&VARS[..n]).unwrap().eval(&point).unwrap();
        let b = r.bind(&VARS[..n]).unwrap().eval(&point).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{e} vs {r}: {a} {b}");
    }
}

#[test]
fn parser_rejects_malformed_sources_with_positions() {
    for (src, col) in [("x +* y", 4), ("sin(x", 6), ("(x + 1))", 8), ("2 ^", 4)] {
        match Expression::parse(src) {
            Err(errcalc::expr::ExprError::Syntax { at, .. }) => {
                assert_eq!((at.line, at.column), (1, col), "{src}")
            }
            other => panic!("{src}: {other:?}"),
        }
    }
}
