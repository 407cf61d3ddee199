pub mod classifiers;
pub mod dataset;
pub mod descriptors;
pub mod error;
pub mod formproc;
pub mod harness;
pub mod imagecore;
pub mod pyramid;

pub use error::{Error, Result};
