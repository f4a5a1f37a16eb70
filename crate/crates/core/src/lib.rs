//! Smooth mechanisms: catalog, valuations, composition, equilibria and budgets.

pub mod budgets;
pub mod catalog;
pub mod composition;
pub mod corpus;
pub mod equilibrium;
pub mod error;
pub mod mechanisms;
pub mod model;
pub mod smoothness;
pub mod valuations;

pub use error::{Error, Result};
