//! Processes with an Ornstein–Uhlenbeck error structure on a discretised
//! Wiener space: the erroneous Donsker walk, the Brownian bridge and the
//! thermal deflection of a stretched string.
//!
//! The walk has `K` independent standard normal increments `ξ_k`, each
//! carrying `Γ[ξ_k] = 1`, and `W_t = K^{-1/2} Σ_{k ≤ ⌊tK⌋} ξ_k`. A linear
//! functional `Σ c_k ξ_k` therefore has `Γ = Σ c_k²`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::calculus::{sharp, ErroneousQuantity};
use crate::cluster::{run_cluster, ClusterConfig};
use crate::error::{Error, Result};
use crate::expr::Jet;
use crate::map::SmoothMap;
use crate::rng;
use crate::stats::{self, Estimate};

/// Minimum sample count for the sampled routes.
pub const MIN_SAMPLES: usize = 10_000;

/// `⌊tK⌋` with a little slack so that `t = j/K` lands on `j`.
fn steps_below(t: f64, k: usize) -> usize {
    ((t * k as f64 + 1e-9).floor() as usize).min(k)
}

fn check_steps(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need K ≥ 2 steps, got {k}")));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidConfig(format!("time {t} outside [0, 1]")));
    }
    Ok(())
}

/// Coefficients of `W_t` on the increments.
pub fn walk_coefficients(t: f64, k: usize) -> Result<Vec<f64>> {
    check_steps(k)?;
    check_time(t)?;
    let j = steps_below(t, k);
    let c = 1.0 / (k as f64).sqrt();
    Ok((1..=k).map(|i| if i <= j { c } else { 0.0 }).collect())
}

/// Coefficients `(1_{k ≤ ⌊sK⌋} − s) / √K` of `X_s = W_s − s W_1`.
pub fn bridge_coefficients(s: f64, k: usize) -> Result<Vec<f64>> {
    check_steps(k)?;
    check_time(s)?;
    let j = steps_below(s, k);
    let r = (k as f64).sqrt();
    Ok((1..=k)
        .map(|i| ((if i <= j { 1.0 } else { 0.0 }) - s) / r)
        .collect())
}

/// `Γ[Σ c_k ξ_k, Σ d_k ξ_k] = Σ c_k d_k`.
pub fn discrete_gamma(c: &[f64], d: &[f64]) -> f64 {
    let prods: Vec<f64> = c.iter().zip(d).map(|(a, b)| a * b).collect();
    stats::pairwise_sum(&prods)
}

/// Exact discrete `Γ[X_s, X_t]`, within `1/K` of `s ∧ t − st`.
pub fn bridge_gamma_analytic(s: f64, t: f64, k: usize) -> Result<f64> {
    check_steps(k)?;
    check_time(s)?;
    check_time(t)?;
    let (s, t) = if s <= t { (s, t) } else { (t, s) };
    let a = steps_below(s, k) as f64;
    let b = steps_below(t, k) as f64;
    let kf = k as f64;
    Ok((a * (1.0 - t) - s * b + kf * s * t) / kf)
}

/// Continuum limit `s ∧ t − st`.
pub fn bridge_gamma_limit(s: f64, t: f64) -> f64 {
    s.min(t) - s * t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BridgeMethod {
    /// Average of `X_s♯ X_t♯` over draws of the increments.
    Sharp,
    /// Clusters method on the map `ξ ↦ (X_s, X_t)`.
    Cluster,
}

fn linear_map(rows: Vec<Vec<f64>>) -> SmoothMap {
    let n = rows[0].len();
    let m = rows.len();
    let rows_v = rows.clone();
    SmoothMap::analytic(
        n,
        m,
        move |x: &[f64]| {
            Ok(rows
                .iter()
                .map(|c| {
                    Jet::from_parts(
                        discrete_gamma(c, x),
                        DVector::from_column_slice(c),
                        DMatrix::zeros(n, n),
                    )
                })
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(Error::MalformedJet)?)
        },
        move |x: &[f64]| Ok(rows_v.iter().map(|c| discrete_gamma(c, x)).collect()),
    )
}

/// Monte-Carlo mean of `f♯ g♯` from the sharp representations of two
/// linear functionals of the increments.
fn sharp_covariance(c: Vec<f64>, d: Vec<f64>, n: usize, seed: u64) -> Result<Estimate> {
    let k = c.len();
    let x = ErroneousQuantity::independent(&vec![0.0; k], &vec![1.0; k])?;
    let sc = sharp(&x, &linear_map(vec![c]))?.coefficients;
    let sd = sharp(&x, &linear_map(vec![d]))?.coefficients;
    let prods = rng::generate(seed, n, |r, _| {
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..k {
            let xi: f64 = r.sample(StandardNormal);
            a += sc[i] * xi;
            b += sd[i] * xi;
        }
        a * b
    });
    Ok(stats::mean_estimate(&prods))
}

pub fn bridge_gamma_estimated(
    s: f64,
    t: f64,
    k: usize,
    method: BridgeMethod,
    n: usize,
    seed: u64,
) -> Result<Estimate> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "sample count {n} is below the minimum {MIN_SAMPLES}"
        )));
    }
    let c = bridge_coefficients(s, k)?;
    let d = bridge_coefficients(t, k)?;
    match method {
        BridgeMethod::Sharp => sharp_covariance(c, d, n, seed),
        BridgeMethod::Cluster => {
            let cfg = ClusterConfig::isotropic(vec![0.0; k], 1.0, n, seed)?;
            let e = run_cluster(&linear_map(vec![c, d]), &cfg)?;
            Ok(Estimate::new(e.gamma_hat[(0, 1)], e.gamma_std_error[(0, 1)]))
        }
    }
}

/// Both sampled routes with the analytic value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeCrossCheck {
    pub analytic: f64,
    pub sharp: Estimate,
    pub cluster: Estimate,
}

/// Runs both sampled routes; fails if they differ by more than 5
/// combined standard errors.
pub fn bridge_cross_check(s: f64, t: f64, k: usize, n: usize, seed: u64) -> Result<BridgeCrossCheck> {
    let analytic = bridge_gamma_analytic(s, t, k)?;
    let sharp = bridge_gamma_estimated(s, t, k, BridgeMethod::Sharp, n, seed)?;
    let cluster = bridge_gamma_estimated(s, t, k, BridgeMethod::Cluster, n, rng::mix_seed(seed, 1))?;
    let diff = Estimate::new(
        sharp.value - cluster.value,
        sharp.std_error.hypot(cluster.std_error),
    );
    let ratio = diff.z_score(0.0);
    if ratio > 5.0 {
        return Err(Error::Disagreement {
            what: format!("bridge Γ at ({s}, {t}) by sharp and cluster sampling"),
            first: sharp.value,
            second: cluster.value,
            ratio,
        });
    }
    Ok(BridgeCrossCheck {
        analytic,
        sharp,
        cluster,
    })
}

/// A string of length `ℓ` under tension `F` at temperature `T`, observed
/// at abscissa `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StringModel {
    pub length: f64,
    pub tension: f64,
    pub temperature: f64,
    pub x: f64,
}

impl StringModel {
    pub fn new(length: f64, tension: f64, temperature: f64, x: f64) -> Result<Self> {
        for (name, v) in [("length", length), ("tension", tension), ("temperature", temperature)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(x > 0.0 && x < length) {
            return Err(Error::InvalidConfig(format!(
                "observation point {x} outside (0, {length})"
            )));
        }
        Ok(StringModel {
            length,
            tension,
            temperature,
            x,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StringDeflection {
    /// `T x (ℓ − x) / (F ℓ)`.
    pub value: f64,
    /// `(T ℓ / F) Γ_bridge(x/ℓ, x/ℓ)` on `steps` increments.
    pub via_bridge: f64,
    pub steps: usize,
}

/// Mean square thermal deflection, checked against the rescaled bridge.
pub fn string_mean_square_deflection(m: &StringModel, steps: usize) -> Result<StringDeflection> {
    let StringModel {
        length: l,
        tension: f,
        temperature: t,
        x,
    } = *m;
    let value = t * x * (l - x) / (f * l);
    let u = x / l;
    let factor = t * l / f;
    let via_bridge = factor * bridge_gamma_analytic(u, u, steps)?;
    let bound = factor * 2.0 / steps as f64;
    if (value - via_bridge).abs() > bound {
        return Err(Error::Disagreement {
            what: "string deflection against the rescaled bridge".into(),
            first: value,
            second: via_bridge,
            ratio: (value - via_bridge).abs() / bound,
        });
    }
    Ok(StringDeflection {
        value,
        via_bridge,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DonskerReport {
    pub steps: usize,
    pub times: Vec<f64>,
    /// Exact discrete `Γ[W_s, W_t] = ⌊(s ∧ t) K⌋ / K`.
    pub analytic: DMatrix<f64>,
    /// Sharp-sampling estimates.
    pub estimated: DMatrix<f64>,
    pub std_error: DMatrix<f64>,
}

impl DonskerReport {
    pub fn diagonal(&self) -> Vec<Estimate> {
        (0..self.times.len())
            .map(|i| Estimate::new(self.estimated[(i, i)], self.std_error[(i, i)]))
            .collect()
    }
}

/// `Γ` of the erroneous walk at every pair of `times`, by sampling the
/// sharp `W_t♯ = K^{-1/2} Σ_{k ≤ ⌊tK⌋} ξ̂_k` over `n` draws.
pub fn donsker_erroneous_walk(
    k: usize,
    times: &[f64],
    n: usize,
    seed: u64,
) -> Result<DonskerReport> {
    check_steps(k)?;
    for &t in times {
        check_time(t)?;
    }
    if n < MIN_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "sample count {n} is below the minimum {MIN_SAMPLES}"
        )));
    }
    let p = times.len();
    let idx: Vec<usize> = times.iter().map(|&t| steps_below(t, k)).collect();
    let scale = 1.0 / (k as f64).sqrt();
    let draws: Vec<Vec<f64>> = rng::generate(seed, n, |r, _| {
        let mut partial = vec![0.0; k + 1];
        for i in 1..=k {
            let xi: f64 = r.sample(StandardNormal);
            partial[i] = partial[i - 1] + xi;
        }
        idx.iter().map(|&j| partial[j] * scale).collect()
    });
    let mut analytic = DMatrix::zeros(p, p);
    let mut estimated = DMatrix::zeros(p, p);
    let mut std_error = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let prods: Vec<f64> = draws.iter().map(|w| w[a] * w[b]).collect();
            let e = stats::mean_estimate(&prods);
            let exact = idx[a].min(idx[b]) as f64 / k as f64;
            for (i, j) in [(a, b), (b, a)] {
                analytic[(i, j)] = exact;
                estimated[(i, j)] = e.value;
                std_error[(i, j)] = e.std_error;
            }
        }
    }
    Ok(DonskerReport {
        steps: k,
        times: times.to_vec(),
        analytic,
        estimated,
        std_error,
    })
}
