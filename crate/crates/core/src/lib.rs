pub mod app;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod field;
pub mod io;
pub mod stepper;
pub mod verify;

pub use error::{Error, Result};
