//! Integer Ramanujan periodic transform (ORPT) feature construction and
//! from-scratch recurrent sequence classifiers.
//!
//! The crate is `no_std` with `alloc`; enable the default `std` feature to get
//! `std::error::Error` impls. Everything here is pure computation: file
//! formats, dataset loading and the training harness live in the `orpt`
//! companion crate.
//!
//! Layout:
//!
//! - [`numtheory`]: divisors, totient, factorization, Ramanujan sums and the
//!   sparse per-prime Ramanujan sequences.
//! - [`matrix`]: the exact integer N×N transform matrix and 1-D analysis /
//!   synthesis.
//! - [`subband`]: the blockwise analysis operator, 2-D subband grids and the
//!   Haar baseline.
//! - [`sequence`]: packing subband grids into `T × F` recurrent inputs.
//! - [`nn`]: RNN / IndRNN / LSTM cells, bidirectional classifier, BPTT,
//!   Adam, dilated causal convolution and residual blocks.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod matrix;
pub mod nn;
pub mod numtheory;
pub mod scalar;
pub mod sequence;
pub mod subband;

pub use error::{Error, Result};
pub use matrix::{CoefficientVector, OrptMatrix};
pub use scalar::Scalar;
pub use sequence::SequenceSample;
pub use subband::{AnalysisOperator, ImagePlane, SubbandGrid};
