//! File formats, frame loading and synthetic streams.

pub mod matrix_file;
pub mod pgm;
pub mod synthetic;
pub mod tables;

pub use matrix_file::{load_matrix, store_matrix, MatrixHeader, MatrixReader, MatrixWriter};
pub use pgm::{read_pgm, write_mask, write_pgm, Frame, FrameSource};
pub use tables::Table;
