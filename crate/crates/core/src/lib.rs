//! Siting and sizing of fast-charging stations on a coupled highway and
//! radial distribution network.

pub mod demand;
pub mod error;
pub mod grid;
pub mod io;
pub mod planner;
pub mod sim;
pub mod transport;

pub use error::{CoreError, Result};
