pub mod barycenter;
pub mod draws;
pub mod error;
pub mod exec;
pub mod glm;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod partition;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
