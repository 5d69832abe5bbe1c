//! Exact truncated q-series engine.
//!
//! The crate evaluates Nahm sums, generic multi-sums, infinite products and
//! Bailey pairs as exact rational series and checks identities between them.

pub mod bailey;
pub mod catalog;
pub mod expr;
pub mod nahm;
pub mod products;
pub mod series;

pub use products::{eval_product, poch_finite, poch_infinite, theta_triple, ProductExpr};
pub use series::{Monomial, QExp, QSeries, Rat};
