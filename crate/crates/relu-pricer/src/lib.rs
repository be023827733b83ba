//! Constructive ReLU network approximation of european maximum option
//! prices on `d` uncorrelated Black–Scholes assets.
//!
//! The crate is organised bottom-up:
//!
//! * [`network`]: sparse affine layers, realizations, metrics, JSON I/O;
//! * [`calculus`]: concatenation, parallelization, identity and affine nets;
//! * [`primitives`]: squaring, multiplication, products, smooth functions;
//! * [`regularity`]: exact derivative recursions for `t ↦ Φ(ln t)`;
//! * [`quadrature`]: composite Gauss–Legendre rules and node budgets;
//! * [`pricing`]: factor networks and the assembled price network;
//! * [`shape`]: size bounds of networks too large to build;
//! * [`oracle`]: reference prices, Monte Carlo, finite differences, sup-error
//!   reports.

pub mod calculus;
pub mod error;
pub mod market;
pub mod network;
pub mod oracle;
pub mod par;
pub mod pricing;
pub mod primitives;
pub mod quadrature;
pub mod regularity;
pub mod shape;

pub use error::{Error, Result};
pub use market::MarketParams;
pub use network::{AffineLayer, NetworkMetrics, NeuralNetwork};
