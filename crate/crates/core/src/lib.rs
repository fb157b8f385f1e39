pub mod applications;
pub mod bounds;
pub mod cli;
pub mod dist;
pub mod entropy;
pub mod error;
pub mod finite;
pub mod functions;
pub mod numeric;
pub mod orlicz;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
