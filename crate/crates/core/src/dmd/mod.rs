//! Dynamic mode decomposition on top of the streaming Gram.

mod engine;
mod factors;

pub use engine::StreamingDmd;
pub use factors::{
    amplitudes, build_atilde, dmd_batch, dmd_from_gram, dmd_modes, sort_eigenpairs, Amplitudes,
    AtildeBlock, DmdFactors,
};
