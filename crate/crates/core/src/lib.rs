//! Numerical verification toolkit for the logarithm-ratio function
//! `h(z) = ln z / ln((1+z^2)/(1+z))` and its relatives.

pub mod acceptance;
pub mod analysis;
pub mod cli;
pub mod densities;
pub mod error;
pub mod eval;
pub mod jet;
pub mod opmon;
pub mod quadrature;
pub mod representations;

pub use error::{Error, Result};
