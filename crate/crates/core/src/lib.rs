pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod controllers;
pub mod model;
pub mod rng;
pub mod sim;
pub mod solver;
pub mod traces;
