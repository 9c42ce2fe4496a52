//! Action recognition from Action Pattern Images with a Series CNN.
//!
//! The crate turns frame sequences into Action Pattern Images
//! ([`action_pattern`]), trains the Series CNN on them from scratch
//! ([`scnn`], [`train`]), grows a trained network by one class through layer
//! transplant ([`transfer`]), and evaluates it ([`eval`]). File formats and
//! synthetic test data live in [`io`] and [`synth`].

pub mod action_pattern;
pub mod error;
pub mod eval;
pub mod imaging;
pub mod io;
pub mod nn;
pub mod scnn;
pub mod synth;
pub mod train;
pub mod transfer;

pub use error::{Error, Result};
