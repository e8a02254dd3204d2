//! Streaming dynamic mode decomposition.
//!
//! A sliding window of snapshot columns is kept together with its Gram
//! matrix. Each new column costs one row of fresh inner products; the
//! singular values, DMD operator, modes and amplitudes are then derived from
//! small `w x w` problems. On top of the engine sit a low-rank/sparse video
//! separation, an orthonormal cosine-transform ingestion path, file formats,
//! a benchmark harness and the `sdmd` command-line tool.

pub mod backsub;
pub mod bench;
pub mod cli;
pub mod dmd;
pub mod error;
pub mod io;
pub mod mos_svd;
pub mod scalar;
pub mod smalldense;
pub mod unitary;
pub mod window_gram;

pub use error::{Error, Result};
pub use scalar::{Precision, Real};
