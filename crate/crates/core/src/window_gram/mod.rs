//! Snapshot window and its incrementally maintained Gram matrix.

mod buffer;
mod gram;
pub mod kernels;

pub use buffer::{ColumnRange, ColumnSource, SlidView, WindowBuffer};
pub use gram::{
    init_gram, slid_gram, slid_gram_sparse, slide_update, slide_update_sparse, warmup_append,
    warmup_append_sparse, GramState,
};
