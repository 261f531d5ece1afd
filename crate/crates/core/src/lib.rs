//! Error calculus: second-order propagation of small errors through
//! smooth maps, Monte-Carlo bias operators, cluster estimation of the
//! error structure of black-box models, and processes with erroneous
//! parameters.
//!
//! ```
//! use errcalc::calculus::{propagate, ErroneousQuantity};
//! use errcalc::map::SmoothMap;
//!
//! let x = ErroneousQuantity::independent(&[2.0], &[0.01]).unwrap();
//! let f = SmoothMap::parse(&["x"], &["x^2"]).unwrap();
//! let y = propagate(&x, &f).unwrap();
//! assert_eq!(y.value()[0], 4.0);
//! assert!((y.gamma()[(0, 0)] - 0.16).abs() < 1e-15);
//! assert!((y.bias()[0] - 0.01).abs() < 1e-15);
//! ```

pub mod bias;
pub mod calculus;
pub mod cluster;
pub mod error;
pub mod expr;
pub mod map;
pub mod process;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
