//! Deterministic reductions and small estimators shared by the Monte-Carlo
//! modules.

use std::fmt;

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn new(value: f64, std_error: f64) -> Self {
        Estimate { value, std_error }
    }

    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            std_error: 0.0,
        }
    }

    /// `|value - target|` in units of the standard error (infinite when the
    /// standard error vanishes and the values differ).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.value - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }

    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ± {}", self.value, self.std_error)
    }
}

/// Pairwise (cascade) summation with a fixed split, so the result depends
/// only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        s
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample mean with the usual `s / sqrt(n)` standard error.
pub fn mean_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let m = mean(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let var = if xs.len() > 1 {
        pairwise_sum(&dev) / (n - 1.0)
    } else {
        0.0
    };
    Estimate::new(m, (var / n).sqrt())
}

pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    (pairwise_sum(&dev) / (xs.len() as f64 - 1.0)).sqrt()
}

/// Linear-interpolated quantile of sorted data, `p` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Least-squares fit of `q(eps) = a + b * eps` expressed as fixed linear
/// weights on the per-step values, so that the extrapolated value and its
/// diagnostics can be formed sample by sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearExtrapolation {
    /// Weights giving the intercept `a`.
    pub intercept: Vec<f64>,
    /// Weights giving the slope `b`.
    pub slope: Vec<f64>,
    /// `residual[k]` holds the weights of `q_k - (a + b eps_k)`.
    pub residual: Vec<Vec<f64>>,
}

impl LinearExtrapolation {
    pub fn new(eps: &[f64]) -> Self {
        let n = eps.len() as f64;
        let mean = eps.iter().sum::<f64>() / n;
        let sxx: f64 = eps.iter().map(|e| (e - mean) * (e - mean)).sum();
        let slope: Vec<f64> = eps.iter().map(|e| (e - mean) / sxx).collect();
        let intercept: Vec<f64> = slope.iter().map(|s| 1.0 / n - mean * s).collect();
        let residual = eps
            .iter()
            .enumerate()
            .map(|(k, ek)| {
                (0..eps.len())
                    .map(|l| {
                        let delta = if k == l { 1.0 } else { 0.0 };
                        delta - intercept[l] - ek * slope[l]
                    })
                    .collect()
            })
            .collect();
        LinearExtrapolation {
            intercept,
            slope,
            residual,
        }
    }

    pub fn combine(weights: &[f64], values: &[f64]) -> f64 {
        weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Extrapolated mean of a quantity observed at every step of an `eps`
/// grid on common random numbers. `columns[k][i]` is sample `i` at step
/// `k`; standard errors account for the correlation across steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolatedMean {
    pub limit: Estimate,
    pub slope: Estimate,
    /// Largest |residual| / standard error over the grid.
    pub residual_ratio: f64,
    pub largest_residual: f64,
    /// Raw per-step means, in grid order.
    pub per_step: Vec<f64>,
}

pub fn extrapolate_mean(fit: &LinearExtrapolation, columns: &[Vec<f64>]) -> ExtrapolatedMean {
    let n = columns.first().map_or(0, |c| c.len());
    let reduce = |w: &[f64]| -> Estimate {
        let xs: Vec<f64> = (0..n)
            .map(|i| w.iter().zip(columns).map(|(wk, c)| wk * c[i]).sum())
            .collect();
        mean_estimate(&xs)
    };
    let per_step: Vec<f64> = columns.iter().map(|c| mean(c)).collect();
    let scale = per_step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut residual_ratio: f64 = 0.0;
    let mut largest_residual: f64 = 0.0;
    for w in &fit.residual {
        let r = reduce(w);
        largest_residual = largest_residual.max(r.value.abs());
        // Round-off against a vanishing standard error is not lack of fit.
        let ratio = if r.value.abs() <= 1e-12 * scale {
            0.0
        } else {
            r.z_score(0.0)
        };
        residual_ratio = residual_ratio.max(ratio);
    }
    ExtrapolatedMean {
        limit: reduce(&fit.intercept),
        slope: reduce(&fit.slope),
        residual_ratio,
        largest_residual,
        per_step,
    }
}

/// Gaussian kernel `exp(-u^2 / 2)`; the normalising constant cancels in
/// every ratio estimator below.
#[inline]
pub fn gauss_kernel(u: f64) -> f64 {
    (-0.5 * u * u).exp()
}

/// Rule-of-thumb bandwidth `1.06 * sd * n^(-1/5)`.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    1.06 * std_dev(xs) * (xs.len() as f64).powf(-0.2)
}

/// Nadaraya–Watson estimate at `at` with sandwich standard error and Kish
/// effective sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelFit {
    pub estimate: Estimate,
    pub effective_neighbors: f64,
}

pub fn nadaraya_watson(xs: &[f64], ys: &[f64], at: f64, bandwidth: f64) -> KernelFit {
    let cutoff = 8.0 * bandwidth;
    let weights: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let d = x - at;
            if d.abs() > cutoff {
                0.0
            } else {
                gauss_kernel(d / bandwidth)
            }
        })
        .collect();
    let s = pairwise_sum(&weights);
    if s == 0.0 {
        return KernelFit {
            estimate: Estimate::new(f64::NAN, f64::INFINITY),
            effective_neighbors: 0.0,
        };
    }
    let wy: Vec<f64> = weights.iter().zip(ys).map(|(w, y)| w * y).collect();
    let m = pairwise_sum(&wy) / s;
    let infl: Vec<f64> = weights
        .iter()
        .zip(ys)
        .map(|(w, y)| {
            let v = w * (y - m) / s;
            v * v
        })
        .collect();
    let w2: Vec<f64> = weights.iter().map(|w| w * w).collect();
    KernelFit {
        estimate: Estimate::new(m, pairwise_sum(&infl).sqrt()),
        effective_neighbors: s * s / pairwise_sum(&w2),
    }
}

/// Ordinary least-squares slope and intercept of `y` on `x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
