//! Denoiser-driven image restoration.
//!
//! The crate provides linear degradation operators, a family of denoisers
//! (closed-form proximal maps, DCT shrinkage, total-variation, and an
//! encoder/decoder CNN with hand-written backpropagation), the
//! half-quadratic-splitting solver with a single gradient step per
//! x-update, and the network obtained by unrolling a fixed number of solver
//! iterations with learnable stage weights and a shared CNN denoiser.

pub mod denoisers;
pub mod error;
pub mod imaging;
pub mod operators;
pub mod rng;
pub mod solver;
pub mod unrolled;

pub use error::{Error, Result};
pub use imaging::Image;
pub use rng::Rng;
