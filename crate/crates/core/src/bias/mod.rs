//! Bias operators of an approximation scheme `Y_ε` of a scalar variable
//! `Y`, estimated by Monte Carlo and extrapolated to `ε → 0`.
//!
//! With `dφ = φ(Y_ε) − φ(Y)` the four operators are the limits of
//!
//! ```text
//! ⟨Ā[φ], χ⟩  = ε⁻¹ E[dφ · χ(Y)]
//! ⟨A̲[φ], χ⟩  = ε⁻¹ E[−dφ · χ(Y_ε)]
//! Ã = (Ā + A̲) / 2        (symmetric)
//! 🅰 = (Ā − A̲) / 2        (singular)
//! ```
//!
//! Pointwise values regress `ε⁻¹ dφ` on `Y` (for `Ā`) or on `Y_ε` (for
//! `A̲`).

mod estimate;
mod functions;

pub use estimate::{
    closed_form, derivation_property_check, dirichlet_form_estimate, estimate_bias_operators,
    kernel_closed_form, locality_test, theoretical_bias_closed_form, BiasOperatorEstimates,
    ClosedForm, DerivationCheck, DerivationOperator, DirichletFormEstimate, FunctionEstimates,
    KernelClosedForm, Locality, LocalityReport, OperatorGrid, Pairing, ETA_LOCALITY,
};
pub use functions::{TestFunction, TestFunctionBank};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const DEFAULT_EPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Minimum sample count accepted by the estimators.
pub const MIN_SAMPLES: usize = 10_000;

/// Law of the exact variable `Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YLaw {
    Normal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
}

impl YLaw {
    pub fn standard_normal() -> Self {
        YLaw::Normal { mean: 0.0, sd: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            YLaw::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            YLaw::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid law for Y: {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            YLaw::Normal { mean, sd } => mean + sd * rng.sample::<f64, _>(StandardNormal),
            YLaw::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
        }
    }

    /// Derivative of the log-density, zero inside a uniform law's support.
    pub fn log_density_slope(&self, y: f64) -> f64 {
        match *self {
            YLaw::Normal { mean, sd } => -(y - mean) / (sd * sd),
            YLaw::Uniform { .. } => 0.0,
        }
    }
}

/// `c + s·Y + n·W`, with `W` standard normal and independent of the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineCoupling {
    pub constant: f64,
    pub slope: f64,
    pub noise: f64,
}

impl AffineCoupling {
    pub const ZERO: AffineCoupling = AffineCoupling::constant(0.0);

    pub const fn constant(c: f64) -> Self {
        AffineCoupling {
            constant: c,
            slope: 0.0,
            noise: 0.0,
        }
    }

    pub const fn linear(slope: f64) -> Self {
        AffineCoupling {
            constant: 0.0,
            slope,
            noise: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.slope == 0.0 && self.noise == 0.0
    }

    fn at(&self, y: f64, w: f64) -> f64 {
        self.constant + self.slope * y + self.noise * w
    }

    /// `E[· | Y = y]`.
    pub fn conditional_mean(&self, y: f64) -> f64 {
        self.constant + self.slope * y
    }

    /// `E[·² | Y = y]`.
    pub fn conditional_second_moment(&self, y: f64) -> f64 {
        let m = self.conditional_mean(y);
        m * m + self.noise * self.noise
    }

    fn validate(&self, what: &str) -> Result<()> {
        if [self.constant, self.slope, self.noise]
            .iter()
            .all(|v| v.is_finite())
        {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("non-finite coupling for {what}")))
        }
    }
}

/// Law of the centred, unit-variance noise `G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseLaw {
    Normal,
    Rademacher,
    /// Uniform on `[−√3, √3]`.
    Uniform,
}

impl NoiseLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseLaw::Normal => rng.sample(StandardNormal),
            NoiseLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseLaw::Uniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    /// `Y_ε = Y + εZ + √ε T G`.
    Diffusive {
        z: AffineCoupling,
        t: AffineCoupling,
        g: NoiseLaw,
    },
    /// `Y_ε = Y + J·B`, `B ~ Bernoulli(ε)`.
    Jump { size: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationScheme {
    y: YLaw,
    perturbation: Perturbation,
    eps: Vec<f64>,
}

/// One joint draw shared by every step of the `ε` grid.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Draw {
    pub y: f64,
    pub z: f64,
    pub t: f64,
    pub g: f64,
    pub u: f64,
}

impl PerturbationScheme {
    pub fn new(y: YLaw, perturbation: Perturbation, eps: Vec<f64>) -> Result<Self> {
        y.validate()?;
        match perturbation {
            Perturbation::Diffusive { z, t, .. } => {
                z.validate("Z")?;
                t.validate("T")?;
            }
            Perturbation::Jump { size } => {
                if !size.is_finite() {
                    return Err(Error::InvalidConfig("non-finite jump size".into()));
                }
            }
        }
        if eps.len() < 2 {
            return Err(Error::InvalidConfig(
                "at least two ε values are needed for extrapolation".into(),
            ));
        }
        if eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::InvalidConfig("ε values must be positive".into()));
        }
        if eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidConfig(
                "ε grid must be strictly decreasing".into(),
            ));
        }
        if matches!(perturbation, Perturbation::Jump { .. }) && eps[0] > 1.0 {
            return Err(Error::InvalidConfig(
                "jump probabilities ε must not exceed 1".into(),
            ));
        }
        Ok(PerturbationScheme {
            y,
            perturbation,
            eps,
        })
    }

    /// Diffusive scheme with normal `G` on the default `ε` grid.
    pub fn diffusive(y: YLaw, z: AffineCoupling, t: AffineCoupling) -> Result<Self> {
        PerturbationScheme::new(
            y,
            Perturbation::Diffusive {
                z,
                t,
                g: NoiseLaw::Normal,
            },
            DEFAULT_EPS.to_vec(),
        )
    }

    pub fn jump(y: YLaw, size: f64) -> Result<Self> {
        PerturbationScheme::new(y, Perturbation::Jump { size }, DEFAULT_EPS.to_vec())
    }

    pub fn with_eps(self, eps: Vec<f64>) -> Result<Self> {
        PerturbationScheme::new(self.y, self.perturbation, eps)
    }

    pub fn y_law(&self) -> YLaw {
        self.y
    }

    pub fn perturbation(&self) -> Perturbation {
        self.perturbation
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn is_diffusive(&self) -> bool {
        matches!(self.perturbation, Perturbation::Diffusive { .. })
    }

    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng) -> Draw {
        let y = self.y.sample(rng);
        match self.perturbation {
            Perturbation::Diffusive { z, t, g } => {
                let wz: f64 = if z.noise != 0.0 {
                    rng.sample(StandardNormal)
                } else {
                    0.0
                };
                let wt: f64 = if t.noise != 0.0 {
                    rng.sample(StandardNormal)
                } else {
                    0.0
                };
                Draw {
                    y,
                    z: z.at(y, wz),
                    t: t.at(y, wt),
                    g: g.sample(rng),
                    u: 0.0,
                }
            }
            Perturbation::Jump { .. } => Draw {
                y,
                z: 0.0,
                t: 0.0,
                g: 0.0,
                u: rng.random(),
            },
        }
    }

    pub(crate) fn perturb(&self, d: &Draw, eps: f64) -> f64 {
        match self.perturbation {
            Perturbation::Diffusive { .. } => d.y + eps * d.z + eps.sqrt() * d.t * d.g,
            Perturbation::Jump { size } => {
                if d.u < eps {
                    d.y + size
                } else {
                    d.y
                }
            }
        }
    }
}
