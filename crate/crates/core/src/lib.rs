pub mod basis;
pub mod boundary;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod io;
pub mod quadrature;
pub mod xray;

pub use error::{Error, Result};
