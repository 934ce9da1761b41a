pub mod afcore;
pub mod error;
pub mod exec;
pub mod forms;
pub mod gauge;
pub mod lift;
pub mod matalg;
pub mod optim;
pub mod presets;
pub mod ssbm;

pub use error::{Error, Result};
