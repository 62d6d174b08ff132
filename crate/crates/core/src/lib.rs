pub mod conditions;
pub mod error;
pub mod experiment;
pub mod generators;
pub mod graph;
pub mod matchers;
pub mod perm;
pub mod rng;
pub mod typicality;

pub use error::{Error, Result};
