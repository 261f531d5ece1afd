use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("{context}: expected dimension {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix not symmetric at ({row}, {col}): difference {difference:e}")]
    NotSymmetric {
        row: usize,
        col: usize,
        difference: f64,
    },

    #[error("matrix not positive semi-definite: eigenvalue {eigenvalue:e} (largest {largest:e})")]
    NotPsd { eigenvalue: f64, largest: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("map returned a malformed jet: {0}")]
    MalformedJet(String),

    #[error("model evaluation failed at cloud point {index} {point:?}: {message}")]
    ModelFailure {
        index: usize,
        point: Vec<f64>,
        message: String,
    },

    #[error("cluster is singular: every cloud point coincides with the first")]
    SingularCloud,

    #[error("non-finite sample: {0}")]
    NonFinite(String),

    #[error("extrapolation to zero step failed for {what}: residual {residual:e} is {ratio:.1} standard errors")]
    Extrapolation {
        what: String,
        residual: f64,
        ratio: f64,
    },

    #[error("kernel bandwidth degenerate at y = {at}: {effective:.1} effective neighbours (need 50)")]
    Bandwidth { at: f64, effective: f64 },

    #[error("{what}: estimates {first} and {second} differ by {ratio:.1} standard errors")]
    Disagreement {
        what: String,
        first: f64,
        second: f64,
        ratio: f64,
    },
}

impl Error {
    /// True for errors caused by the caller's input (bad syntax, shapes,
    /// configuration); false for numerical failures found while computing.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Expr(e) => !matches!(e, ExprError::Domain { .. }),
            Error::Dimension { .. }
            | Error::NotSymmetric { .. }
            | Error::NotPsd { .. }
            | Error::InvalidConfig(_) => true,
            _ => false,
        }
    }
}
