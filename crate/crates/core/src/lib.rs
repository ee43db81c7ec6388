pub mod config;
pub mod error;
pub mod evolution;
pub mod fem;
pub mod generator;
pub mod leray;
pub mod linalg;
pub mod mesh;
pub mod nullspace;
pub mod pipeline;
pub mod pressure;
pub mod report;
pub mod simplex;
pub mod spectrum;

pub use error::{Error, Result};
