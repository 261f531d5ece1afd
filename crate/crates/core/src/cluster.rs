//! Clusters method: estimate the error matrix and bias of a model output by
//! evaluating the model over a random cloud of parameters around a centre.
//!
//! The cloud is `λ_i = λ₀ + √s · R · ξ_i` with `R R = shape` and `ξ_i`
//! isotropic with identity covariance. Estimates are reported per unit of
//! the scale `s`:
//!
//! ```text
//! gamma_hat = Cov_i[X(λ_i)] / s
//! bias_hat  = (mean_i X(λ_i) − X(λ₀)) / s
//! ```
//!
//! so that as `s → 0` they approach the coefficients `propagate` returns for
//! an input with error matrix `shape` and no bias.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::calculus::{psd_repair, psd_sqrt, ErroneousQuantity};
use crate::error::{Error, Result};
use crate::map::SmoothMap;
use crate::rng;
use crate::stats;

/// Relative standard error above which an estimate is flagged.
pub const LOW_PRECISION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudDistribution {
    Gaussian,
    /// Uniform in the ellipsoid, scaled to the same covariance.
    UniformEllipsoid,
}

impl CloudDistribution {
    fn sample<R: Rng + ?Sized>(self, rng: &mut R, d: usize) -> Vec<f64> {
        let mut xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if self == CloudDistribution::UniformEllipsoid {
            let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            let radius = ((d + 2) as f64).sqrt() * rng.random::<f64>().powf(1.0 / d as f64);
            for v in &mut xi {
                *v *= radius / norm;
            }
        }
        xi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub center: Vec<f64>,
    /// Dispersion per unit scale; the cloud covariance is `scale · shape`.
    pub shape: DMatrix<f64>,
    pub scale: f64,
    pub points: usize,
    pub distribution: CloudDistribution,
    pub seed: u64,
}

impl ClusterConfig {
    pub fn new(
        center: Vec<f64>,
        shape: DMatrix<f64>,
        scale: f64,
        points: usize,
        distribution: CloudDistribution,
        seed: u64,
    ) -> Result<Self> {
        let d = center.len();
        if d == 0 {
            return Err(Error::InvalidConfig("empty cluster centre".into()));
        }
        if shape.nrows() != d {
            return Err(Error::Dimension {
                context: "cluster dispersion",
                expected: d,
                found: shape.nrows(),
            });
        }
        let shape = psd_repair(shape)?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "cluster scale must be positive, got {scale}"
            )));
        }
        if points < d + 2 {
            return Err(Error::InvalidConfig(format!(
                "cluster needs at least {} points, got {points}",
                d + 2
            )));
        }
        Ok(ClusterConfig {
            center,
            shape,
            scale,
            points,
            distribution,
            seed,
        })
    }

    /// Gaussian cloud with `shape = I`.
    pub fn isotropic(center: Vec<f64>, scale: f64, points: usize, seed: u64) -> Result<Self> {
        let d = center.len();
        ClusterConfig::new(
            center,
            DMatrix::identity(d, d),
            scale,
            points,
            CloudDistribution::Gaussian,
            seed,
        )
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn is_degenerate(&self) -> bool {
        self.shape.iter().all(|v| *v == 0.0)
    }

    /// The cloud, row `i` being point `i`.
    pub fn cloud(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let root = psd_sqrt(&self.shape) * self.scale.sqrt();
        rng::generate(self.seed, self.points, |r, _| {
            let xi = DVector::from_vec(self.distribution.sample(r, d));
            let off = &root * xi;
            self.center.iter().zip(off.iter()).map(|(c, o)| c + o).collect()
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudDiagnostics {
    /// Extreme eigenvalues of the sample covariance of the cloud, per unit
    /// scale.
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub condition_number: f64,
    /// Largest relative standard error over non-zero diagonal entries of
    /// `gamma_hat`.
    pub max_relative_std_error: f64,
    pub low_precision: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterEstimate {
    pub gamma_hat: DMatrix<f64>,
    pub gamma_std_error: DMatrix<f64>,
    pub bias_hat: DVector<f64>,
    pub bias_std_error: DVector<f64>,
    pub points: usize,
    pub diagnostics: CloudDiagnostics,
}

impl ClusterEstimate {
    /// Largest deviation from `reference`, in standard errors, over every
    /// entry of `gamma_hat` and `bias_hat`. Entries that agree to round-off
    /// count as zero.
    pub fn max_z_score(&self, reference: &ErroneousQuantity) -> f64 {
        let z = |v: f64, se: f64, r: f64| {
            let d = (v - r).abs();
            if d <= 1e-12 * r.abs().max(1e-300) || d == 0.0 {
                0.0
            } else {
                d / se
            }
        };
        let m = self.bias_hat.len();
        let mut worst: f64 = 0.0;
        for a in 0..m {
            worst = worst.max(z(self.bias_hat[a], self.bias_std_error[a], reference.bias()[a]));
            for b in 0..m {
                worst = worst.max(z(
                    self.gamma_hat[(a, b)],
                    self.gamma_std_error[(a, b)],
                    reference.gamma()[(a, b)],
                ));
            }
        }
        worst
    }
}

fn evaluate_cloud(model: &SmoothMap, cloud: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let outs = rng::map_indexed(cloud.len(), |i| model.eval(&cloud[i]));
    let mut values = Vec::with_capacity(cloud.len());
    for (i, r) in outs.into_iter().enumerate() {
        let v = r.map_err(|e| Error::ModelFailure {
            index: i,
            point: cloud[i].clone(),
            message: e.to_string(),
        })?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::ModelFailure {
                index: i,
                point: cloud[i].clone(),
                message: "non-finite output".into(),
            });
        }
        values.push(v);
    }
    Ok(values)
}

/// Sample covariance with leave-one-out jackknife standard errors.
/// `C₋ᵢ = (Q − uᵢuᵢᵀ · M/(M−1)) / (M−2)` with `u` the centred data and
/// `Q = Σ uuᵀ`.
fn covariance_jackknife(data: &[Vec<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = data.len();
    let m = data[0].len();
    let nf = n as f64;
    let means: Vec<f64> = (0..m)
        .map(|a| stats::mean(&data.iter().map(|r| r[a]).collect::<Vec<_>>()))
        .collect();
    let centred: Vec<Vec<f64>> = data
        .iter()
        .map(|r| r.iter().zip(&means).map(|(x, mu)| x - mu).collect())
        .collect();
    let mut cov = DMatrix::zeros(m, m);
    let mut se = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let prods: Vec<f64> = centred.iter().map(|u| u[a] * u[b]).collect();
            let q = stats::pairwise_sum(&prods);
            let loo: Vec<f64> = prods
                .iter()
                .map(|p| (q - p * nf / (nf - 1.0)) / (nf - 2.0))
                .collect();
            let loo_mean = stats::mean(&loo);
            let dev: Vec<f64> = loo.iter().map(|c| (c - loo_mean) * (c - loo_mean)).collect();
            let s = ((nf - 1.0) / nf * stats::pairwise_sum(&dev)).sqrt();
            let c = q / (nf - 1.0);
            cov[(a, b)] = c;
            cov[(b, a)] = c;
            se[(a, b)] = s;
            se[(b, a)] = s;
        }
    }
    (cov, se)
}

fn cloud_diagnostics(cfg: &ClusterConfig, cloud: &[Vec<f64>]) -> (f64, f64) {
    let offsets: Vec<Vec<f64>> = cloud
        .iter()
        .map(|p| p.iter().zip(&cfg.center).map(|(x, c)| x - c).collect())
        .collect();
    let (cov, _) = covariance_jackknife(&offsets);
    let eig = SymmetricEigen::new(cov / cfg.scale).eigenvalues;
    (eig.min(), eig.max())
}

/// Evaluates `model` over the cloud of `cfg` and reduces it to normalised
/// error matrix and bias estimates with jackknife standard errors.
pub fn run_cluster(model: &SmoothMap, cfg: &ClusterConfig) -> Result<ClusterEstimate> {
    if model.input_dim() != cfg.dim() {
        return Err(Error::Dimension {
            context: "cluster centre",
            expected: model.input_dim(),
            found: cfg.dim(),
        });
    }
    if cfg.is_degenerate() {
        return Err(Error::InvalidConfig(
            "cluster dispersion has zero spectral norm".into(),
        ));
    }
    let cloud = cfg.cloud();
    if cloud.iter().all(|p| *p == cloud[0]) {
        return Err(Error::SingularCloud);
    }
    let x0 = model.eval(&cfg.center).map_err(|e| Error::ModelFailure {
        index: usize::MAX,
        point: cfg.center.clone(),
        message: format!("at the centre: {e}"),
    })?;
    let values = evaluate_cloud(model, &cloud)?;
    let m = x0.len();
    let n = values.len();
    let s = cfg.scale;
    let deltas: Vec<Vec<f64>> = values
        .iter()
        .map(|v| v.iter().zip(&x0).map(|(a, b)| a - b).collect())
        .collect();
    let (cov, cov_se) = covariance_jackknife(&deltas);
    let mut bias_hat = DVector::zeros(m);
    let mut bias_se = DVector::zeros(m);
    for a in 0..m {
        let col: Vec<f64> = deltas.iter().map(|d| d[a]).collect();
        // The jackknife of a mean is the usual standard error.
        let e = stats::mean_estimate(&col);
        bias_hat[a] = e.value / s;
        bias_se[a] = e.std_error / s;
    }
    let gamma_hat = cov / s;
    let gamma_std_error = cov_se / s;
    let max_relative_std_error = (0..m)
        .filter(|&a| gamma_hat[(a, a)] != 0.0)
        .map(|a| gamma_std_error[(a, a)] / gamma_hat[(a, a)].abs())
        .fold(0.0, f64::max);
    let (lo, hi) = cloud_diagnostics(cfg, &cloud);
    Ok(ClusterEstimate {
        gamma_hat,
        gamma_std_error,
        bias_hat,
        bias_std_error: bias_se,
        points: n,
        diagnostics: CloudDiagnostics {
            min_eigenvalue: lo,
            max_eigenvalue: hi,
            condition_number: if lo > 0.0 { hi / lo } else { f64::INFINITY },
            max_relative_std_error,
            low_precision: max_relative_std_error > LOW_PRECISION,
        },
    })
}

/// Model `X(ω, λ)` with inputs `ω` first. The `ω` cloud varies `ω` with
/// `λ` held at its centre and vice versa; the two normalised estimates are
/// added. A `λ` cloud with zero dispersion contributes nothing.
pub fn run_cluster_erroneous_model(
    model: &SmoothMap,
    omega: &ClusterConfig,
    lambda: &ClusterConfig,
) -> Result<ClusterEstimate> {
    let (dw, dl) = (omega.dim(), lambda.dim());
    if model.input_dim() != dw + dl {
        return Err(Error::Dimension {
            context: "erroneous model inputs",
            expected: model.input_dim(),
            found: dw + dl,
        });
    }
    if !lambda.is_degenerate() && omega.seed == lambda.seed {
        return Err(Error::InvalidConfig(
            "the ω and λ clouds need independent seeds".into(),
        ));
    }
    let lam0 = lambda.center.clone();
    let om0 = omega.center.clone();
    let over_omega = SmoothMap::black_box(dw, model.output_dim(), None, {
        let model = model.clone();
        move |w: &[f64]| {
            let mut x = w.to_vec();
            x.extend_from_slice(&lam0);
            model.eval(&x)
        }
    });
    let mut total = run_cluster(&over_omega, omega)?;
    if lambda.is_degenerate() {
        return Ok(total);
    }
    let over_lambda = SmoothMap::black_box(dl, model.output_dim(), None, {
        let model = model.clone();
        move |l: &[f64]| {
            let mut x = om0.clone();
            x.extend_from_slice(l);
            model.eval(&x)
        }
    });
    let part = run_cluster(&over_lambda, lambda)?;
    total.gamma_hat += &part.gamma_hat;
    total.bias_hat += &part.bias_hat;
    total.gamma_std_error = total
        .gamma_std_error
        .zip_map(&part.gamma_std_error, |a, b| a.hypot(b));
    total.bias_std_error = total
        .bias_std_error
        .zip_map(&part.bias_std_error, |a, b| a.hypot(b));
    total.points += part.points;
    let d = &mut total.diagnostics;
    let p = &part.diagnostics;
    d.min_eigenvalue = d.min_eigenvalue.min(p.min_eigenvalue);
    d.max_eigenvalue = d.max_eigenvalue.max(p.max_eigenvalue);
    d.condition_number = d.condition_number.max(p.condition_number);
    d.max_relative_std_error = d.max_relative_std_error.max(p.max_relative_std_error);
    d.low_precision |= p.low_precision;
    Ok(total)
}

/// One cell of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub points: usize,
    pub scale: f64,
    /// Root mean square over replicates and entries of `gamma_hat − Γ`.
    pub gamma_rmse: f64,
    pub bias_rmse: f64,
    /// Root mean square over both kinds of entry.
    pub combined_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Per scale: least-squares slope of `log rmse` against `log M`.
    pub gamma_exponent_in_points: Vec<(f64, f64)>,
    pub bias_exponent_in_points: Vec<(f64, f64)>,
    /// Per size: slope of `log gamma_rmse` against `log scale`.
    pub gamma_exponent_in_scale: Vec<(usize, f64)>,
    /// Per size: the scale with the smallest combined error, and whether
    /// the combined error is non-monotone across the scale sweep.
    pub best_scale: Vec<(usize, f64, bool)>,
}

impl ConvergenceReport {
    pub fn row(&self, points: usize, scale: f64) -> Option<&ConvergenceRow> {
        self.rows
            .iter()
            .find(|r| r.points == points && r.scale == scale)
    }
}

fn slope_of_logs(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    stats::least_squares(&lx, &ly).0
}

/// Runs `replicates` independent clusters for every `(M, scale)` in the
/// sweep, measuring errors against `reference` (the `propagate` result for
/// an input with error matrix `base.shape`).
pub fn convergence_study(
    model: &SmoothMap,
    base: &ClusterConfig,
    points: &[usize],
    scales: &[f64],
    replicates: usize,
    reference: &ErroneousQuantity,
) -> Result<ConvergenceReport> {
    if points.is_empty() || scales.is_empty() || replicates == 0 {
        return Err(Error::InvalidConfig("empty convergence sweep".into()));
    }
    let m = model.output_dim();
    let mut rows = Vec::new();
    for &mm in points {
        for &s in scales {
            let mut g2 = 0.0;
            let mut b2 = 0.0;
            for r in 0..replicates {
                let cfg = ClusterConfig::new(
                    base.center.clone(),
                    base.shape.clone(),
                    s,
                    mm,
                    base.distribution,
                    rng::mix_seed(base.seed, r as u64),
                )?;
                let e = run_cluster(model, &cfg)?;
                g2 += (&e.gamma_hat - reference.gamma()).norm_squared();
                b2 += (&e.bias_hat - reference.bias()).norm_squared();
            }
            let reps = replicates as f64;
            let mf = m as f64;
            rows.push(ConvergenceRow {
                points: mm,
                scale: s,
                gamma_rmse: (g2 / (reps * mf * mf)).sqrt(),
                bias_rmse: (b2 / (reps * mf)).sqrt(),
                combined_rmse: ((g2 + b2) / (reps * (mf * mf + mf))).sqrt(),
            });
        }
    }
    let cell = |mm: usize, s: f64| {
        rows.iter()
            .find(|r| r.points == mm && r.scale == s)
            .expect("cell present")
    };
    let ms: Vec<f64> = points.iter().map(|&p| p as f64).collect();
    let mut gamma_exponent_in_points = Vec::new();
    let mut bias_exponent_in_points = Vec::new();
    if points.len() >= 2 {
        for &s in scales {
            let g: Vec<f64> = points.iter().map(|&p| cell(p, s).gamma_rmse).collect();
            let b: Vec<f64> = points.iter().map(|&p| cell(p, s).bias_rmse).collect();
            gamma_exponent_in_points.push((s, slope_of_logs(&ms, &g)));
            bias_exponent_in_points.push((s, slope_of_logs(&ms, &b)));
        }
    }
    let mut gamma_exponent_in_scale = Vec::new();
    let mut best_scale = Vec::new();
    for &p in points {
        let combined: Vec<f64> = scales.iter().map(|&s| cell(p, s).combined_rmse).collect();
        if scales.len() >= 2 {
            let g: Vec<f64> = scales.iter().map(|&s| cell(p, s).gamma_rmse).collect();
            gamma_exponent_in_scale.push((p, slope_of_logs(scales, &g)));
        }
        let (best, _) = combined
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
        let steps: Vec<f64> = combined.windows(2).map(|w| w[1] - w[0]).collect();
        let monotone = steps.iter().all(|d| *d >= 0.0) || steps.iter().all(|d| *d <= 0.0);
        best_scale.push((p, scales[best], !monotone));
    }
    Ok(ConvergenceReport {
        rows,
        gamma_exponent_in_points,
        bias_exponent_in_points,
        gamma_exponent_in_scale,
        best_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::propagate;

    fn map(vars: &[&str], srcs: &[&str]) -> SmoothMap {
        SmoothMap::parse(vars, srcs).unwrap()
    }

    #[test]
    fn identity_model() {
        let cfg = ClusterConfig::isotropic(vec![0.3], 1e-3, 20_000, 1).unwrap();
        let e = run_cluster(&map(&["l"], &["l"]), &cfg).unwrap();
        assert!((e.gamma_hat[(0, 0)] - 1.0).abs() < 4.0 * e.gamma_std_error[(0, 0)]);
        assert!(e.bias_hat[0].abs() < 4.0 * e.bias_std_error[0]);
        assert!(!e.diagnostics.low_precision);
    }

    #[test]
    fn square_at_two_matches_propagate() {
        let f = map(&["l"], &["l^2"]);
        let cfg = ClusterConfig::isotropic(vec![2.0], 1e-4, 200_000, 2).unwrap();
        let e = run_cluster(&f, &cfg).unwrap();
        let x = ErroneousQuantity::independent(&[2.0], &[1.0]).unwrap();
        let r = propagate(&x, &f).unwrap();
        assert_eq!((r.gamma()[(0, 0)], r.bias()[0]), (16.0, 1.0));
        assert!(e.max_z_score(&r) < 5.0, "{e:?}");
    }

    #[test]
    fn constant_model_is_exactly_zero() {
        let cfg = ClusterConfig::isotropic(vec![1.0, 2.0], 1e-2, 1000, 3).unwrap();
        let e = run_cluster(&map(&["a", "b"], &["7"]), &cfg).unwrap();
        assert_eq!(e.gamma_hat[(0, 0)], 0.0);
        assert_eq!(e.bias_hat[0], 0.0);
    }

    #[test]
    fn reruns_are_bit_identical() {
        let f = map(&["a", "b"], &["a * exp(b)", "sin(a) + b"]);
        let cfg = ClusterConfig::isotropic(vec![0.5, -0.2], 1e-3, 10_000, 4).unwrap();
        assert_eq!(run_cluster(&f, &cfg).unwrap(), run_cluster(&f, &cfg).unwrap());
    }

    #[test]
    fn jackknife_matches_direct_leave_one_out() {
        let data: Vec<Vec<f64>> = (0..9)
            .map(|i| vec![(i as f64 * 0.7).sin(), (i * i) as f64 * 0.1])
            .collect();
        let (_, se) = covariance_jackknife(&data);
        let n = data.len();
        let loo: Vec<f64> = (0..n)
            .map(|i| {
                let rest: Vec<&Vec<f64>> = data.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, r)| r).collect();
                let k = rest.len() as f64;
                let ma = rest.iter().map(|r| r[0]).sum::<f64>() / k;
                let mb = rest.iter().map(|r| r[1]).sum::<f64>() / k;
                rest.iter().map(|r| (r[0] - ma) * (r[1] - mb)).sum::<f64>() / (k - 1.0)
            })
            .collect();
        let m = loo.iter().sum::<f64>() / n as f64;
        let want = ((n as f64 - 1.0) / n as f64 * loo.iter().map(|c| (c - m) * (c - m)).sum::<f64>()).sqrt();
        assert!((se[(0, 1)] - want).abs() < 1e-12);
    }

    #[test]
    fn uniform_ellipsoid_has_identity_covariance() {
        let cfg = ClusterConfig::new(
            vec![0.0, 0.0, 0.0],
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0, 0.25])),
            1.0,
            100_000,
            CloudDistribution::UniformEllipsoid,
            5,
        )
        .unwrap();
        let e = run_cluster(&map(&["a", "b", "c"], &["a", "b", "c"]), &cfg).unwrap();
        for (i, want) in [1.0, 4.0, 0.25].iter().enumerate() {
            assert!((e.gamma_hat[(i, i)] - want).abs() < 4.0 * e.gamma_std_error[(i, i)]);
        }
        for p in cfg.cloud() {
            let r2 = p[0] * p[0] + p[1] * p[1] / 4.0 + p[2] * p[2] / 0.25;
            assert!(r2 <= 5.0 + 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        let eye = DMatrix::identity(2, 2);
        let g = CloudDistribution::Gaussian;
        assert!(ClusterConfig::new(vec![0.0, 0.0], eye.clone(), 1.0, 3, g, 0).is_err());
        assert!(ClusterConfig::new(vec![0.0, 0.0], eye.clone(), 0.0, 10, g, 0).is_err());
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            ClusterConfig::new(vec![0.0, 0.0], bad, 1.0, 10, g, 0),
            Err(Error::NotPsd { .. })
        ));
        let zero = ClusterConfig::new(vec![0.0], DMatrix::zeros(1, 1), 1.0, 10, g, 0).unwrap();
        assert!(run_cluster(&map(&["a"], &["a"]), &zero).is_err());
    }

    #[test]
    fn minimal_cloud_is_flagged() {
        let cfg = ClusterConfig::isotropic(vec![1.0], 1e-2, 3, 6).unwrap();
        let e = run_cluster(&map(&["a"], &["exp(a)"]), &cfg).unwrap();
        assert!(e.diagnostics.low_precision);
    }

    #[test]
    fn model_failure_reports_the_point() {
        let cfg = ClusterConfig::isotropic(vec![0.01], 1.0, 100, 7).unwrap();
        match run_cluster(&map(&["a"], &["log(a)"]), &cfg) {
            Err(Error::ModelFailure { index, point, .. }) => {
                assert!(point[0] <= 0.0);
                assert_eq!(cfg.cloud()[index], point);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn erroneous_model() {
        let f = map(&["w", "l"], &["w + l"]);
        let om = ClusterConfig::isotropic(vec![0.0], 1e-2, 50_000, 8).unwrap();
        let la = ClusterConfig::isotropic(vec![0.0], 1e-2, 50_000, 9).unwrap();
        let e = run_cluster_erroneous_model(&f, &om, &la).unwrap();
        assert!((e.gamma_hat[(0, 0)] - 2.0).abs() < 4.0 * e.gamma_std_error[(0, 0)]);
        let same = ClusterConfig::isotropic(vec![0.0], 1e-2, 50_000, 8).unwrap();
        assert!(run_cluster_erroneous_model(&f, &om, &same).is_err());

        let sq = map(&["w", "l"], &["w^2"]);
        let flat = ClusterConfig::new(
            vec![0.0],
            DMatrix::zeros(1, 1),
            1.0,
            10,
            CloudDistribution::Gaussian,
            8,
        )
        .unwrap();
        let om = ClusterConfig::isotropic(vec![1.5], 1e-3, 10_000, 8).unwrap();
        let reduced = run_cluster_erroneous_model(&sq, &om, &flat).unwrap();
        let direct = run_cluster(&map(&["w"], &["w^2"]), &om).unwrap();
        assert_eq!(reduced.gamma_hat, direct.gamma_hat);
        assert_eq!(reduced.bias_hat, direct.bias_hat);
    }
}
