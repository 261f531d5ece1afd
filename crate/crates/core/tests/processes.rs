use errcalc::process::{
    bridge_coefficients, bridge_gamma_analytic, bridge_gamma_limit, discrete_gamma,
    string_mean_square_deflection, StringModel,
};
use proptest::prelude::*;

#[test]
fn discrete_bridge_converges() {
    let pts = [0.1, 0.5, 0.9];
    let mut last = f64::INFINITY;
    for k in [16usize, 64, 256, 1024] {
        let mut worst: f64 = 0.0;
        for &s in &pts {
            for &t in &pts {
                let d = bridge_gamma_analytic(s, t, k).unwrap() - bridge_gamma_limit(s, t);
                worst = worst.max(d.abs());
            }
        }
        assert!(worst <= 2.0 / k as f64, "K={k}: {worst}");
        assert!(worst < last, "K={k}: {worst} after {last}");
        last = worst;
    }
}

proptest! {
    #[test]
    fn string_is_a_rescaled_bridge(
        l in 0.1..10.0f64, f in 0.1..10.0f64, t in 0.1..10.0f64, u in 0.01..0.99f64,
    ) {
        let m = StringModel::new(l, f, t, u * l).unwrap();
        let d = string_mean_square_deflection(&m, 1024).unwrap();
        prop_assert!((d.value - d.via_bridge).abs() <= t * l / f * 2.0 / 1024.0);
    }

    #[test]
    fn bridge_gamma_is_bilinear(
        s in 0.0..=1.0f64, t in 0.0..=1.0f64, a in -3.0..3.0f64, b in -3.0..3.0f64,
        k in 2usize..300,
    ) {
        let cs = bridge_coefficients(s, k).unwrap();
        let ct = bridge_coefficients(t, k).unwrap();
        let mix: Vec<f64> = cs.iter().zip(&ct).map(|(x, y)| a * x + b * y).collect();
        let lhs = discrete_gamma(&mix, &mix);
        let gss = bridge_gamma_analytic(s, s, k).unwrap();
        let gst = bridge_gamma_analytic(s, t, k).unwrap();
        let gtt = bridge_gamma_analytic(t, t, k).unwrap();
        let rhs = a * a * gss + 2.0 * a * b * gst + b * b * gtt;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }
}
