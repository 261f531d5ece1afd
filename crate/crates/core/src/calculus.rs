//! Variance and bias of infinitesimal errors carried through smooth maps.
//!
//! An [`ErroneousQuantity`] holds a value together with the leading-order
//! coefficients of its error: the bias vector `A` and the error matrix
//! `Γ`. Propagation through `F` follows the first-order rule for `Γ` and
//! the second-order rule for the bias:
//!
//! ```text
//! Γ_out      = J Γ Jᵀ
//! A_out[k]   = Σ_i ∂_i F_k · A[i]  +  ½ Σ_ij ∂_ij F_k · Γ[i][j]
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::expr::Jet;
use crate::map::{jacobian_of, SmoothMap};
use crate::rng;
use crate::stats::{self, Estimate};

/// Relative threshold below which negative eigenvalues count as round-off.
pub const PSD_TOLERANCE: f64 = 1e-12;

/// Value, bias and error matrix of a vector of erroneous quantities.
///
/// Bias and `Γ` are coefficients of the leading order of the error scale,
/// not finite perturbations.
#[derive(Debug, Clone, PartialEq)]
pub struct ErroneousQuantity {
    value: DVector<f64>,
    bias: DVector<f64>,
    gamma: DMatrix<f64>,
}

/// Checks symmetry and positive semi-definiteness, clipping eigenvalues in
/// `[-PSD_TOLERANCE * λ_max, 0)` to zero. Larger violations are errors.
pub fn psd_repair(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension {
            context: "error matrix columns",
            expected: n,
            found: m.ncols(),
        });
    }
    let scale = m.amax();
    for i in 0..n {
        for j in i + 1..n {
            let d = (m[(i, j)] - m[(j, i)]).abs();
            if d > PSD_TOLERANCE * scale {
                return Err(Error::NotSymmetric {
                    row: i,
                    col: j,
                    difference: d,
                });
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("error matrix entry".into()));
    }
    if n == 0 || scale == 0.0 {
        return Ok(m);
    }
    let sym = DMatrix::from_fn(n, n, |i, j| {
        if i <= j {
            m[(i, j)]
        } else {
            m[(j, i)]
        }
    });
    let eig = SymmetricEigen::new(sym.clone());
    let largest = eig.eigenvalues.max();
    let smallest = eig.eigenvalues.min();
    if smallest >= 0.0 {
        return Ok(sym);
    }
    if smallest < -PSD_TOLERANCE * largest.max(0.0) {
        return Err(Error::NotPsd {
            eigenvalue: smallest,
            largest,
        });
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let r = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i <= j {
            r[(i, j)]
        } else {
            r[(j, i)]
        }
    }))
}

/// Symmetric square root of a PSD matrix.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let is_diagonal = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == 0.0));
    if is_diagonal {
        return DMatrix::from_fn(n, n, |i, j| if i == j { m[(i, i)].max(0.0).sqrt() } else { 0.0 });
    }
    let eig = SymmetricEigen::new(m.clone());
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

impl ErroneousQuantity {
    pub fn new(value: DVector<f64>, bias: DVector<f64>, gamma: DMatrix<f64>) -> Result<Self> {
        let n = value.len();
        if bias.len() != n {
            return Err(Error::Dimension {
                context: "bias vector",
                expected: n,
                found: bias.len(),
            });
        }
        if gamma.nrows() != n {
            return Err(Error::Dimension {
                context: "error matrix rows",
                expected: n,
                found: gamma.nrows(),
            });
        }
        let gamma = psd_repair(gamma)?;
        Ok(ErroneousQuantity { value, bias, gamma })
    }

    /// Independent errors with the given variances and no bias.
    pub fn independent(values: &[f64], variances: &[f64]) -> Result<Self> {
        if values.len() != variances.len() {
            return Err(Error::Dimension {
                context: "variances",
                expected: values.len(),
                found: variances.len(),
            });
        }
        ErroneousQuantity::new(
            DVector::from_column_slice(values),
            DVector::zeros(values.len()),
            DMatrix::from_diagonal(&DVector::from_column_slice(variances)),
        )
    }

    pub fn with_bias(mut self, bias: &[f64]) -> Result<Self> {
        if bias.len() != self.dim() {
            return Err(Error::Dimension {
                context: "bias vector",
                expected: self.dim(),
                found: bias.len(),
            });
        }
        self.bias = DVector::from_column_slice(bias);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.value.len()
    }

    pub fn value(&self) -> &DVector<f64> {
        &self.value
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.bias
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// Standard deviations per unit error scale, `sqrt(Γ_ii)`.
    pub fn sigmas(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.gamma[(i, i)].sqrt()).collect()
    }
}

fn check_input(x: &ErroneousQuantity, f: &SmoothMap) -> Result<()> {
    if f.input_dim() != x.dim() {
        return Err(Error::Dimension {
            context: "map input",
            expected: x.dim(),
            found: f.input_dim(),
        });
    }
    Ok(())
}

fn scalar_jet(f: &SmoothMap, point: &[f64]) -> Result<Jet> {
    if f.output_dim() != 1 {
        return Err(Error::Dimension {
            context: "scalar map output",
            expected: 1,
            found: f.output_dim(),
        });
    }
    Ok(f.jets(point)?.swap_remove(0))
}

/// `J Γ Jᵀ`, upper triangle computed and mirrored. Shared by [`propagate`]
/// and [`fisher_transport`].
fn transport_gamma(jac: &DMatrix<f64>, gamma: &DMatrix<f64>) -> DMatrix<f64> {
    let m = jac.nrows();
    let t = jac * gamma;
    let mut out = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let v = t.row(a).dot(&jac.row(b));
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    out
}

fn quadratic(gamma: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    (gamma * v).dot(u)
}

/// Pushes `x` through `f`.
pub fn propagate(x: &ErroneousQuantity, f: &SmoothMap) -> Result<ErroneousQuantity> {
    check_input(x, f)?;
    let jets = f.jets(x.value.as_slice())?;
    let jac = jacobian_of(&jets, x.dim());
    let gamma = transport_gamma(&jac, &x.gamma);
    let bias = DVector::from_iterator(
        jets.len(),
        jets.iter().map(|j| {
            let first = j.gradient.dot(&x.bias);
            let second = j.hessian.component_mul(&x.gamma).sum();
            first + 0.5 * second
        }),
    );
    let value = DVector::from_iterator(jets.len(), jets.iter().map(|j| j.value));
    ErroneousQuantity::new(value, bias, gamma)
}

/// Second-order operator `Σ ½ σ_i² ∂_ii + Σ b_i ∂_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorL {
    variances: Vec<f64>,
    drift: Vec<f64>,
}

impl GeneratorL {
    pub fn new(variances: Vec<f64>) -> Result<Self> {
        if let Some(v) = variances.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidConfig(format!("variance {v} is negative")));
        }
        let n = variances.len();
        Ok(GeneratorL {
            variances,
            drift: vec![0.0; n],
        })
    }

    pub fn with_drift(mut self, drift: Vec<f64>) -> Result<Self> {
        if drift.len() != self.variances.len() {
            return Err(Error::Dimension {
                context: "drift",
                expected: self.variances.len(),
                found: drift.len(),
            });
        }
        self.drift = drift;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.variances.len()
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn apply(&self, jet: &Jet) -> f64 {
        let mut v = 0.0;
        for i in 0..self.dim() {
            v += 0.5 * self.variances[i] * jet.hessian[(i, i)] + self.drift[i] * jet.gradient[i];
        }
        v
    }
}

/// `Γ(F) = L(F²) − 2F·L(F)`, with the jet of `F²` formed by the product
/// rule. Drift terms of `L` cancel.
pub fn carre_du_champ(l: &GeneratorL, f: &SmoothMap, point: &[f64]) -> Result<f64> {
    if f.input_dim() != l.dim() {
        return Err(Error::Dimension {
            context: "generator dimension",
            expected: f.input_dim(),
            found: l.dim(),
        });
    }
    let j = scalar_jet(f, point)?;
    let sq = j.mul(&j);
    Ok(l.apply(&sq) - 2.0 * j.value * l.apply(&j))
}

/// `Γ(f, g) = ¼ [Γ(f + g) − Γ(f − g)]`.
pub fn polarize(x: &ErroneousQuantity, f: &SmoothMap, g: &SmoothMap) -> Result<f64> {
    check_input(x, f)?;
    check_input(x, g)?;
    let p = x.value.as_slice();
    let df = scalar_jet(f, p)?.gradient;
    let dg = scalar_jet(g, p)?.gradient;
    let plus = &df + &dg;
    let minus = &df - &dg;
    Ok(0.25 * (quadratic(&x.gamma, &plus, &plus) - quadratic(&x.gamma, &minus, &minus)))
}

/// The ℓ¹ rule `σ_F = Σ |∂_i F| σ_i`. It is not coherent under
/// re-factorisation of `F` and exists to exhibit that.
pub fn ugly_propagate(sigmas: &[f64], f: &SmoothMap, point: &[f64]) -> Result<f64> {
    if sigmas.len() != f.input_dim() {
        return Err(Error::Dimension {
            context: "sigma vector",
            expected: f.input_dim(),
            found: sigmas.len(),
        });
    }
    if let Some(s) = sigmas.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::InvalidConfig(format!("sigma {s} is negative")));
    }
    let g = scalar_jet(f, point)?.gradient;
    Ok(g.iter().zip(sigmas).map(|(d, s)| d.abs() * s).sum())
}

/// Stepwise versus one-shot error of a pipeline of maps, under the ℓ¹ rule
/// and under the quadratic rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineComparison {
    pub stepwise_ugly: Vec<f64>,
    pub direct_ugly: Vec<f64>,
    /// Standard deviations from full-covariance propagation, stage by stage.
    pub stepwise_gauss: Vec<f64>,
    /// Standard deviations from `J_total Γ J_totalᵀ`.
    pub direct_gauss: Vec<f64>,
}

impl PipelineComparison {
    /// Largest relative gap between stepwise and one-shot ℓ¹ values.
    pub fn ugly_discrepancy(&self) -> f64 {
        relative_gap(&self.stepwise_ugly, &self.direct_ugly)
    }

    pub fn gauss_discrepancy(&self) -> f64 {
        relative_gap(&self.stepwise_gauss, &self.direct_gauss)
    }
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs();
            if d == 0.0 {
                0.0
            } else {
                d / y.abs().max(x.abs())
            }
        })
        .fold(0.0, f64::max)
}

/// Runs `stages` in order from `point`, with independent input errors of
/// standard deviation `sigmas`.
pub fn ugly_pipeline(
    sigmas: &[f64],
    stages: &[SmoothMap],
    point: &[f64],
) -> Result<PipelineComparison> {
    let variances: Vec<f64> = sigmas.iter().map(|s| s * s).collect();
    let x0 = ErroneousQuantity::independent(point, &variances)?;
    let mut at = point.to_vec();
    let mut ugly = sigmas.to_vec();
    let mut gauss = x0.clone();
    let mut total = DMatrix::identity(point.len(), point.len());
    for stage in stages {
        if stage.input_dim() != at.len() {
            return Err(Error::Dimension {
                context: "pipeline stage input",
                expected: at.len(),
                found: stage.input_dim(),
            });
        }
        let jac = stage.jacobian(&at)?;
        ugly = (0..jac.nrows())
            .map(|k| (0..jac.ncols()).map(|i| jac[(k, i)].abs() * ugly[i]).sum())
            .collect();
        gauss = propagate(&gauss, stage)?;
        total = &jac * total;
        at = stage.eval(&at)?;
    }
    let direct_ugly = (0..total.nrows())
        .map(|k| (0..total.ncols()).map(|i| total[(k, i)].abs() * sigmas[i]).sum())
        .collect();
    let direct_gamma = transport_gamma(&total, x0.gamma());
    Ok(PipelineComparison {
        stepwise_ugly: ugly,
        direct_ugly,
        stepwise_gauss: gauss.sigmas(),
        direct_gauss: (0..direct_gamma.nrows())
            .map(|k| direct_gamma[(k, k)].sqrt())
            .collect(),
    })
}

/// Randomised gradient `f♯ = Σ c_i ξ_i` with `ξ` i.i.d. standard normal,
/// where `c = Γ^{1/2} ∇f` so that `E[(f♯)²] = Γ(f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpRepresentation {
    pub coefficients: DVector<f64>,
    /// `∇fᵀ Γ ∇f` computed directly.
    pub gamma: f64,
}

impl SharpRepresentation {
    pub fn squared_norm(&self) -> f64 {
        self.coefficients.norm_squared()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.coefficients
            .iter()
            .map(|c| c * rng.sample::<f64, _>(StandardNormal))
            .sum()
    }

    /// Monte-Carlo mean of `(f♯)²` over `n` draws.
    pub fn second_moment(&self, n: usize, seed: u64) -> Estimate {
        let xs = rng::generate(seed, n, |r, _| {
            let s = self.sample(r);
            s * s
        });
        stats::mean_estimate(&xs)
    }
}

pub fn sharp(x: &ErroneousQuantity, f: &SmoothMap) -> Result<SharpRepresentation> {
    check_input(x, f)?;
    let grad = scalar_jet(f, x.value.as_slice())?.gradient;
    let root = psd_sqrt(&x.gamma);
    Ok(SharpRepresentation {
        coefficients: &root * &grad,
        gamma: quadratic(&x.gamma, &grad, &grad),
    })
}

/// `E|V| = sqrt(2/π) σ` for `V ~ N(0, σ²)`.
pub fn gaussian_abs_moment(sigma: f64) -> f64 {
    (2.0 / std::f64::consts::PI).sqrt() * sigma
}

/// First absolute moment of the error on `F` from those of its inputs,
/// `E|e_F| = sqrt(Σ F'_i² (E|e_i|)²)`, valid for small Gaussian errors.
pub fn laplace_first_moment(abs_moments: &[f64], f: &SmoothMap, point: &[f64]) -> Result<f64> {
    if abs_moments.len() != f.input_dim() {
        return Err(Error::Dimension {
            context: "absolute moments",
            expected: f.input_dim(),
            found: abs_moments.len(),
        });
    }
    if let Some(m) = abs_moments.iter().find(|m| !(**m >= 0.0)) {
        return Err(Error::InvalidConfig(format!("absolute moment {m} is negative")));
    }
    let g = scalar_jet(f, point)?.gradient;
    Ok(g.iter()
        .zip(abs_moments)
        .map(|(d, m)| d * d * m * m)
        .sum::<f64>()
        .sqrt())
}

/// Precision matrix carried to a new parametrisation.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherTransport {
    pub precision: DMatrix<f64>,
    pub jacobian_rank: usize,
    /// Rank-deficient Jacobian: the reparametrisation is not locally
    /// injective and the transported precision is degenerate.
    pub degenerate: bool,
}

/// Transports the precision `Γ(θ)` through `φ = g(θ)`; computed by
/// [`propagate`] on a bias-free quantity.
pub fn fisher_transport(
    precision: &DMatrix<f64>,
    g: &SmoothMap,
    point: &[f64],
) -> Result<FisherTransport> {
    let theta = ErroneousQuantity::new(
        DVector::from_column_slice(point),
        DVector::zeros(point.len()),
        precision.clone(),
    )?;
    let phi = propagate(&theta, g)?;
    let jac = g.jacobian(point)?;
    let svd = jac.svd(false, false);
    let top = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > 1e-12 * top.max(f64::MIN_POSITIVE))
        .count();
    Ok(FisherTransport {
        precision: phi.gamma,
        jacobian_rank: rank,
        degenerate: rank < point.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dichotomy {
    /// Variance negligible against the bias.
    WeaklyStochastic,
    /// Variance of the same order as the bias.
    StronglyStochastic,
}

/// Declared asymptotic orders: bias `~ ε^bias`, variance `~ ε^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorOrders {
    pub bias: f64,
    pub gamma: f64,
}

pub fn classify_dichotomy(x: &ErroneousQuantity, orders: ErrorOrders) -> Dichotomy {
    if x.gamma.iter().all(|v| *v == 0.0) || orders.gamma > orders.bias {
        Dichotomy::WeaklyStochastic
    } else {
        Dichotomy::StronglyStochastic
    }
}
