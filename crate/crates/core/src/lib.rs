//! Fountain (LT) codes with feedback-driven, nonuniform input-symbol selection.
//!
//! The crate covers the whole pipeline:
//!
//! * [`degree`] builds and samples Ideal/Robust Soliton degree distributions.
//! * [`codec`] holds symbols, XOR arithmetic, the peeling decoder and a GF(2)
//!   maximum-likelihood decoder.
//! * [`encoders`] implements the LT, All-Distance, Quantized-Distance and
//!   Delete-and-Conquer encoder state machines.
//! * [`feedback`] implements the receiver-side feedback policies and their
//!   wire format.
//! * [`simulator`] drives complete encoder/channel/decoder sessions.
//! * [`analysis`] has the exact k=2 and k=3 results, including the absorbing
//!   Markov chain for Delete-and-Conquer.
//! * [`bounds`] computes union bounds on ML decoding failure.
//! * [`cli`] is the command-line front end.

pub mod analysis;
pub mod bounds;
pub mod cli;
pub mod codec;
pub mod degree;
pub mod encoders;
mod error;
pub mod feedback;
pub mod simulator;

pub use error::{Error, Result};
