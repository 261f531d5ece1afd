use errcalc_web::{bridge_profile, cloud, propagate_one, string_profile};

#[test]
fn propagates_a_square() {
    let r = propagate_one("x^2", "x", &[2.0], &[0.01]).unwrap();
    assert_eq!(r[0], 4.0);
    assert!((r[1] - 0.16).abs() < 1e-15);
    assert!((r[2] - 0.01).abs() < 1e-15);
}

#[test]
fn reports_parse_errors() {
    let e = propagate_one("x +", "x", &[1.0], &[1.0]).unwrap_err();
    assert!(e.contains("1:4"), "{e}");
    assert!(propagate_one("x + y", "x", &[1.0], &[1.0]).is_err());
}

#[test]
fn bridge_profile_is_pinned_and_peaks_at_the_middle() {
    let p = bridge_profile(1024, 11).unwrap();
    assert_eq!(p.len(), 33);
    assert_eq!(p[1], 0.0);
    assert_eq!(p[31], 0.0);
    assert!((p[16] - 0.25).abs() <= 2.0 / 1024.0);
    for row in p.chunks(3) {
        assert!((row[1] - row[2]).abs() <= 2.0 / 1024.0);
    }
}

#[test]
fn string_profile_matches_the_parabola() {
    let p = string_profile(2.0, 3.0, 1.5, 1024, 9).unwrap();
    for row in p.chunks(2) {
        let x = row[0];
        assert!((row[1] - 1.5 * x * (2.0 - x) / 6.0).abs() < 1e-12);
    }
}

#[test]
fn cloud_is_deterministic_and_agrees_with_propagation() {
    let a = cloud("x*y", "x,y", &[1.0, 2.0], &[0.5, 0.5], 1e-3, 20_000, 3).unwrap();
    let b = cloud("x*y", "x,y", &[1.0, 2.0], &[0.5, 0.5], 1e-3, 20_000, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.points().len(), 40_000);
    let s = a.summary();
    assert!((s[0] - s[4]).abs() <= 5.0 * s[1]);
    assert!((s[2] - s[5]).abs() <= 5.0 * s[3]);
    assert!(cloud("x", "x", &[1.0], &[1.0], 1e-3, 100, 1).is_err());
}
