mod support;

use errcalc::calculus::{
    carre_du_champ, fisher_transport, polarize, propagate, sharp, ErroneousQuantity, GeneratorL,
};
use errcalc::expr::{Expression, Node};
use errcalc::map::SmoothMap;
use errcalc::rng::substream;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;
use support::{random_node, random_point, rewrite, VARS};

fn map_of(nodes: Vec<Node>, n: usize) -> SmoothMap {
    let outs = nodes
        .into_iter()
        .enumerate()
        .map(|(k, node)| (format!("f{}", k + 1), Expression::from_node(node)))
        .collect();
    SmoothMap::from_expressions(&VARS[..n], outs).unwrap()
}

fn random_quantity<R: Rng>(rng: &mut R, n: usize) -> ErroneousQuantity {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
    let gamma = &a * a.transpose();
    let bias = DVector::from_fn(n, |_, _| rng.random_range(-0.1..0.1));
    ErroneousQuantity::new(DVector::from_vec(random_point(rng, n)), bias, gamma).unwrap()
}

fn close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * scale.max(a.abs()).max(b.abs()).max(f64::MIN_POSITIVE)
}

// Biases that cancel to zero in one form keep a few ulps of the O(1)
// intermediate derivatives in an equivalent form.
const BIAS_ROUNDOFF: f64 = 1e-15;

fn close_bias(a: f64, b: f64) -> bool {
    (a - b).abs() <= BIAS_ROUNDOFF || close(a, b, 1e-12, 1e-8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn composition_is_coherent(seed in any::<u64>()) {
        let mut rng = substream(seed, 0);
        let n = 1 + (seed % 3) as usize;
        let inner = map_of(vec![random_node(&mut rng, n, 3), random_node(&mut rng, n, 3)], n);
        let outer = map_of(vec![random_node(&mut rng, 2, 3)], 2);
        let x = random_quantity(&mut rng, n);
        let stepwise = propagate(&propagate(&x, &inner).unwrap(), &outer).unwrap();
        let direct = propagate(&x, &SmoothMap::compose(&outer, &inner).unwrap()).unwrap();
        let gs = stepwise.gamma()[(0, 0)];
        let gd = direct.gamma()[(0, 0)];
        prop_assert!(close(gs, gd, 1e-12, 1e-9), "gamma {gs} vs {gd}");
        let (bs, bd) = (stepwise.bias()[0], direct.bias()[0]);
        prop_assert!(close_bias(bs, bd), "bias {bs} vs {bd}");
    }

    #[test]
    fn rewritten_expressions_propagate_alike(seed in any::<u64>()) {
        let mut rng = substream(seed, 0);
        let n = 1 + (seed % 3) as usize;
        let node = random_node(&mut rng, n, 4);
        let other = rewrite(&mut rng, &node);
        let x = random_quantity(&mut rng, n);
        let a = propagate(&x, &map_of(vec![node], n)).unwrap();
        let b = propagate(&x, &map_of(vec![other], n)).unwrap();
        prop_assert!(close(a.gamma()[(0, 0)], b.gamma()[(0, 0)], 1e-12, 1e-9));
        prop_assert!(close_bias(a.bias()[0], b.bias()[0]), "bias {} vs {}", a.bias()[0], b.bias()[0]);
    }

    #[test]
    fn propagation_preserves_positivity(seed in any::<u64>()) {
        let mut rng = substream(seed, 0);
        let n = 1 + (seed % 3) as usize;
        let m = 1 + (seed / 3 % 4) as usize;
        let f = map_of((0..m).map(|_| random_node(&mut rng, n, 3)).collect(), n);
        let y = propagate(&random_quantity(&mut rng, n), &f).unwrap();
        let g = y.gamma();
        prop_assert_eq!(g.clone(), g.transpose());
        let eig = SymmetricEigen::new(g.clone()).eigenvalues;
        prop_assert!(eig.min() >= -1e-12 * eig.max().max(0.0));
    }

    #[test]
    fn sharp_norm_reproduces_gamma(seed in any::<u64>()) {
        let mut rng = substream(seed, 0);
        let n = 1 + (seed % 3) as usize;
        let f = map_of(vec![random_node(&mut rng, n, 3)], n);
        let x = random_quantity(&mut rng, n);
        let s = sharp(&x, &f).unwrap();
        let g = propagate(&x, &f).unwrap().gamma()[(0, 0)];
        prop_assert!(close(s.squared_norm(), g, 1e-14, 1e-10), "{} vs {g}", s.squared_norm());
    }

    #[test]
    fn carre_du_champ_is_the_weighted_gradient_norm(seed in any::<u64>()) {
        let mut rng = substream(seed, 0);
        let n = 1 + (seed % 3) as usize;
        let f = map_of(vec![random_node(&mut rng, n, 3)], n);
        let p = random_point(&mut rng, n);
        let var: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let drift: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g = f.jacobian(&p).unwrap();
        let want: f64 = (0..n).map(|i| var[i] * g[(0, i)] * g[(0, i)]).sum();
        let terms: f64 = (0..n).map(|i| (var[i] * g[(0, i)] * g[(0, i)]).abs()).sum();
        let jet = &f.jets(&p).unwrap()[0];
        // L(F^2) and 2F L(F) cancel down to the gradient norm; allow a few
        // ulps of the cancelled terms on top of the relative tolerance.
        let cancelled = |b: &[f64]| -> f64 {
            4.0 * f64::EPSILON
                * jet.value.abs()
                * (0..n)
                    .map(|i| var[i] * jet.hessian[(i, i)].abs() + 2.0 * (b[i] * jet.gradient[i]).abs())
                    .sum::<f64>()
        };
        let (round_plain, round_drifted) = (cancelled(&vec![0.0; n]), cancelled(&drift));
        let l = GeneratorL::new(var).unwrap();
        let plain = carre_du_champ(&l, &f, &p).unwrap();
        let drifted = carre_du_champ(&l.with_drift(drift).unwrap(), &f, &p).unwrap();
        prop_assert!((plain - want).abs() <= 1e-10 * terms.max(plain.abs()) + round_plain, "{plain} vs {want}");
        prop_assert!((drifted - want).abs() <= 1e-10 * terms.max(drifted.abs()) + round_drifted, "{drifted} vs {want}");
    }

    #[test]
    fn polarization_matches_the_off_diagonal(seed in any::<u64>()) {
        let mut rng = substream(seed, 0);
        let n = 1 + (seed % 3) as usize;
        let (a, b) = (random_node(&mut rng, n, 3), random_node(&mut rng, n, 3));
        let x = random_quantity(&mut rng, n);
        let joint = propagate(&x, &map_of(vec![a.clone(), b.clone()], n)).unwrap();
        let p = polarize(&x, &map_of(vec![a], n), &map_of(vec![b], n)).unwrap();
        let scale = joint.gamma()[(0, 0)].abs().max(joint.gamma()[(1, 1)].abs());
        prop_assert!(close(p, joint.gamma()[(0, 1)], scale, 1e-12));
    }

    #[test]
    fn fisher_transport_is_the_gamma_path(seed in any::<u64>()) {
        let mut rng = substream(seed, 0);
        let n = 1 + (seed % 3) as usize;
        let m = 1 + (seed / 3 % 3) as usize;
        let g = map_of((0..m).map(|_| random_node(&mut rng, n, 3)).collect(), n);
        let x = random_quantity(&mut rng, n);
        let t = fisher_transport(x.gamma(), &g, x.value().as_slice()).unwrap();
        let y = propagate(&x, &g).unwrap();
        prop_assert_eq!(&t.precision, y.gamma());
    }
}

#[test]
fn sharp_second_moment_by_sampling() {
    let x = ErroneousQuantity::new(
        DVector::from_vec(vec![0.4, -1.0]),
        DVector::zeros(2),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]),
    )
    .unwrap();
    let f = SmoothMap::parse(&["a", "b"], &["sin(a) * exp(b)"]).unwrap();
    let s = sharp(&x, &f).unwrap();
    let m = s.second_moment(200_000, 9);
    assert!(m.within(s.gamma, 4.0), "{m} vs {}", s.gamma);
}
