pub mod error;
pub mod graph;
pub mod tv1d;

pub use error::{Error, Result};
pub mod decompose;
pub mod projections;
pub mod certify;
pub mod oracle;
pub mod solvers;
pub mod generate;
pub mod io;
