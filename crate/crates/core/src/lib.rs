//! Pulse-level simulation and analysis of the microwave-activated
//! conditional-phase gate between two fixed-frequency transmons.

pub mod dynamics;
pub mod error;
pub mod formats;
pub mod linalg;
pub mod model;
pub mod protocols;
pub mod runner;
pub mod tomography;
pub mod units;

pub use error::{Error, Result};
