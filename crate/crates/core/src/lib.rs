pub mod coeff;
pub mod conditions;
pub mod config;
pub mod error;
pub mod field_io;
pub mod harness;
pub mod model;
pub mod optim;
pub mod ou;
pub mod phi;
pub mod quad;
pub mod reaction;
pub mod rng;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
