pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod gateway;
pub mod harness;
pub mod pipelines;
pub mod retrieval;
pub mod seed;
pub mod synthetic;

pub use error::{Error, Result};
