//! Recurrent cells, the sequence classifier, optimizer and reference
//! temporal-convolution ops.

pub mod cell;
pub mod conv;
pub mod gradcheck;
pub mod network;
pub mod optim;
pub mod params;

pub use cell::{indrnn_step, lstm_step, rnn_step, HiddenState};
pub use network::{accumulate_gradient, batch_logits, loss_and_grad, predict, run_sequence, BatchStats};
pub use optim::{Adam, AdamConfig};
pub use params::{parameter_count, CellKind, Direction, RecurrentParams, Shape};
