pub mod asymptotics;
pub mod bvp;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod modes;
pub mod ode;
pub mod operators;
pub mod quad;
pub mod verify;

pub use error::{Error, Result};
