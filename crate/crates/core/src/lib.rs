//! Equilibrium consumption and investment for time-inconsistent Merton investors.
//!
//! An investor with a general discount function `lambda` re-evaluates the Merton problem
//! at every instant. The strategies computed here are open-loop Nash equilibria: no
//! short-lived deviation from them improves the objective seen from the deviation time.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases at the crate
//! root fix the scalar to `f64`.

pub mod closedform;
pub mod compare;
pub mod config;
pub mod curve;
pub mod equilibrium;
mod error;
pub mod export;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod pde;
pub mod policy;
pub mod quadrature;
mod rng;
mod scalar;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type TimeGrid = grid::TimeGrid<f64>;
pub type Curve = curve::Curve<f64>;
pub type MarketModel = model::MarketModel<f64>;
pub type DiscountFunction = model::DiscountFunction<f64>;
pub type Utility = model::Utility<f64>;
pub type EquilibriumPolicy = equilibrium::EquilibriumPolicy<f64>;
pub type ThetaSurface = pde::ThetaSurface<f64>;
