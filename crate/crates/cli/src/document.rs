//! Model documents: variables with their errors, named output expressions,
//! and the optional scheme and cluster blocks.

use std::collections::BTreeMap;

use errcalc::bias::{
    AffineCoupling, NoiseLaw, Perturbation, PerturbationScheme, TestFunction, TestFunctionBank,
    YLaw, DEFAULT_EPS,
};
use errcalc::calculus::{psd_repair, ErroneousQuantity};
use errcalc::cluster::CloudDistribution;
use errcalc::expr::Expression;
use errcalc::map::SmoothMap;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Relative tolerance between a covariance diagonal and the declared
/// variance.
const DIAGONAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variable {
    pub name: String,
    pub value: f64,
    #[serde(default)]
    pub variance: f64,
    #[serde(default)]
    pub bias: f64,
    /// Row of the error matrix; when any variable has one, all must.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    Normal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
}

impl From<LawSpec> for YLaw {
    fn from(l: LawSpec) -> YLaw {
        match l {
            LawSpec::Normal { mean, sd } => YLaw::Normal { mean, sd },
            LawSpec::Uniform { low, high } => YLaw::Uniform { low, high },
        }
    }
}

/// `constant + slope·Y + noise·W`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub noise: f64,
}

impl From<CouplingSpec> for AffineCoupling {
    fn from(c: CouplingSpec) -> AffineCoupling {
        AffineCoupling {
            constant: c.constant,
            slope: c.slope,
            noise: c.noise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    Normal,
    Rademacher,
    Uniform,
}

impl From<NoiseSpec> for NoiseLaw {
    fn from(n: NoiseSpec) -> NoiseLaw {
        match n {
            NoiseSpec::Normal => NoiseLaw::Normal,
            NoiseSpec::Rademacher => NoiseLaw::Rademacher,
            NoiseSpec::Uniform => NoiseLaw::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub y: LawSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<CouplingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<CouplingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<NoiseSpec>,
    /// Jump size; selects the Bernoulli jump scheme instead of diffusion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Test functions of `y`; the default bank when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locality_function: Option<String>,
}

impl SchemeSpec {
    pub fn scheme(&self) -> Result<PerturbationScheme, CliError> {
        let eps = self.eps.clone().unwrap_or_else(|| DEFAULT_EPS.to_vec());
        let perturbation = match self.jump {
            Some(size) => {
                if self.z.is_some() || self.t.is_some() || self.g.is_some() {
                    return Err(CliError::Usage(
                        "a jump scheme takes no z, t or g block".into(),
                    ));
                }
                Perturbation::Jump { size }
            }
            None => Perturbation::Diffusive {
                z: self.z.unwrap_or_default().into(),
                t: self
                    .t
                    .unwrap_or(CouplingSpec {
                        constant: 1.0,
                        ..CouplingSpec::default()
                    })
                    .into(),
                g: self.g.unwrap_or(NoiseSpec::Normal).into(),
            },
        };
        Ok(PerturbationScheme::new(self.y.into(), perturbation, eps)?)
    }

    pub fn bank(&self) -> Result<TestFunctionBank, CliError> {
        match &self.functions {
            None => Ok(TestFunctionBank::default()),
            Some(srcs) => {
                let fs = srcs
                    .iter()
                    .map(|s| TestFunction::from_expression(s))
                    .collect::<errcalc::Result<Vec<_>>>()?;
                Ok(TestFunctionBank::new(fs)?)
            }
        }
    }

    pub fn locality_function(&self) -> Result<TestFunction, CliError> {
        match &self.locality_function {
            None => Ok(TestFunction::monomial(1)),
            Some(s) => Ok(TestFunction::from_expression(s)?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum DistributionSpec {
    Gaussian,
    UniformEllipsoid,
}

impl From<DistributionSpec> for CloudDistribution {
    fn from(d: DistributionSpec) -> CloudDistribution {
        match d {
            DistributionSpec::Gaussian => CloudDistribution::Gaussian,
            DistributionSpec::UniformEllipsoid => CloudDistribution::UniformEllipsoid,
        }
    }
}

/// The cloud is centred on the variable values; `shape` defaults to the
/// document's error matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    #[serde(default)]
    pub variables: Vec<Variable>,
    #[serde(default)]
    pub expressions: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<ClusterSpec>,
    #[serde(default)]
    pub seed: u64,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(CliError::Usage(format!(
            "{what}: row of length {} in a {n}×{n} matrix",
            r.len()
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::Usage(format!("{what}: non-finite entry")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl ModelDocument {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }

    /// Structural checks that hold for every command.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut seen = std::collections::BTreeSet::new();
        for v in &self.variables {
            if !is_identifier(&v.name) {
                return Err(CliError::Usage(format!("invalid variable name `{}`", v.name)));
            }
            if !seen.insert(v.name.as_str()) {
                return Err(CliError::Usage(format!("duplicate variable `{}`", v.name)));
            }
            if !(v.value.is_finite() && v.bias.is_finite()) {
                return Err(CliError::Usage(format!("non-finite value or bias for `{}`", v.name)));
            }
            if !(v.variance >= 0.0 && v.variance.is_finite()) {
                return Err(CliError::Usage(format!(
                    "variance of `{}` must be non-negative, got {}",
                    v.name, v.variance
                )));
            }
        }
        if !self.variables.is_empty() {
            self.quantity()?;
        }
        for name in self.expressions.keys() {
            if !is_identifier(name) {
                return Err(CliError::Usage(format!("invalid output name `{name}`")));
            }
        }
        if !self.expressions.is_empty() {
            self.model()?;
        }
        if let Some(s) = &self.scheme {
            s.scheme()?;
            s.bank()?;
            s.locality_function()?;
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.value).collect()
    }

    /// The error matrix: the covariance rows if given, else the diagonal of
    /// variances.
    pub fn gamma(&self) -> Result<DMatrix<f64>, CliError> {
        let n = self.variables.len();
        let given = self.variables.iter().filter(|v| v.covariance.is_some()).count();
        if given == 0 {
            return Ok(DMatrix::from_diagonal(&DVector::from_iterator(
                n,
                self.variables.iter().map(|v| v.variance),
            )));
        }
        if given != n {
            return Err(CliError::Usage(
                "covariance rows must be given for every variable or none".into(),
            ));
        }
        let rows: Vec<Vec<f64>> = self
            .variables
            .iter()
            .map(|v| v.covariance.clone().unwrap_or_default())
            .collect();
        let m = matrix_from_rows(&rows, "covariance")?;
        for (i, v) in self.variables.iter().enumerate() {
            let d = m[(i, i)];
            if (d - v.variance).abs() > DIAGONAL_TOLERANCE * d.abs().max(v.variance.abs()) {
                return Err(CliError::Usage(format!(
                    "covariance diagonal {d} of `{}` differs from its variance {}",
                    v.name, v.variance
                )));
            }
        }
        Ok(psd_repair(m)?)
    }

    pub fn quantity(&self) -> Result<ErroneousQuantity, CliError> {
        let bias: Vec<f64> = self.variables.iter().map(|v| v.bias).collect();
        Ok(ErroneousQuantity::new(
            DVector::from_vec(self.values()),
            DVector::from_vec(bias),
            self.gamma()?,
        )?)
    }

    /// Outputs in name order over the declared variables.
    pub fn model(&self) -> Result<SmoothMap, CliError> {
        let names = self.names();
        let outputs = self
            .expressions
            .iter()
            .map(|(k, src)| Ok((k.clone(), Expression::parse_declared(src, &names)?)))
            .collect::<errcalc::Result<Vec<_>>>()?;
        Ok(SmoothMap::from_expressions(&names, outputs)?)
    }

    /// Checks needed by the commands that evaluate the model.
    pub fn require_model(&self) -> Result<(SmoothMap, ErroneousQuantity), CliError> {
        if self.variables.is_empty() {
            return Err(CliError::Usage("document declares no variables".into()));
        }
        if self.expressions.is_empty() {
            return Err(CliError::Usage("document has an empty expression map".into()));
        }
        Ok((self.model()?, self.quantity()?))
    }

    /// Canonical JSON text: sorted keys, compact, 17 significant digits.
    pub fn to_canonical_json(&self) -> String {
        let v = serde_json::to_value(self).expect("documents serialise");
        crate::report::write_compact(&v)
    }
}
