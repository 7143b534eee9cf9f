//! Closed-form densities of linear and log-linear stochastic heat equations
//! on the unit interval, with Fokker-Planck and Feynman-Kac cross-checks.

pub mod cli;
pub mod densities;
pub mod error;
pub mod feynman_kac;
pub mod fokker_planck;
pub mod homogenization;
pub mod model;
pub mod quadrature;
pub mod spectral;
pub mod spectral_oracle;

pub use error::{Error, Result};
