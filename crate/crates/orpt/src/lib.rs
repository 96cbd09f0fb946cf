//! IO, file formats, training harness and command-line front end for the
//! ORPT sequence-classification pipeline. The numerical work lives in
//! [`orpt_core`]; this crate reads datasets, writes feature sets,
//! checkpoints and CSV reports, and drives training runs.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod features;
pub mod harness;
pub mod matrix_io;
pub mod pgm;
pub mod verify;

pub use error::{OrptError, Result};
