//! Verification toolkit for spherically symmetric Finsler metrics `F = u φ(r, s)`.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix `f64`, which is what the oracle and the command line use.

pub mod error;
pub mod expr;
pub mod families;
pub mod geometry;
pub mod jets;
pub mod linalg;
pub mod oracle;
pub mod phi;
pub mod quadrature;
pub mod sampling;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use expr::{parse_phi, Expr, ParseError};
pub use jets::{Jet2, JetShape, UnivariateDerivs};
pub use phi::{catalog_list, ModelSpec, PhiKind, PhiModel, RegularityReport};
pub use scalar::Scalar;

pub type Jet = jets::Jet2<f64>;
pub type Config = geometry::Config<f64>;
pub type SprayJets = geometry::SprayJets<f64>;
pub type Sym2 = geometry::Sym2<f64>;
pub type Rank4 = geometry::Rank4<f64>;
pub type ScalarJets = geometry::ScalarJets<f64>;
pub type TensorBundle = geometry::TensorBundle<f64>;
pub type FitResult = families::FitResult<f64>;
