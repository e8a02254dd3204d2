use super::factors::{dmd_from_gram, DmdFactors};
use crate::error::{Error, Result};
use crate::mos_svd::{svd_from_gram, SvdFactors};
use crate::scalar::Real;
use crate::window_gram::{
    slid_gram, slid_gram_sparse, slide_update, slide_update_sparse, warmup_append,
    warmup_append_sparse, GramState, SlidView, WindowBuffer,
};

/// Sliding-window DMD over a stream of snapshots.
///
/// The first `width` pushes fill the window; every later push evicts the
/// oldest column. Only one row of the Gram matrix is recomputed per step.
#[derive(Clone, Debug)]
pub struct StreamingDmd<T> {
    window: WindowBuffer<T>,
    gram: GramState,
    rank_tol: f64,
    time_base: u64,
}

impl<T: Real> StreamingDmd<T> {
    pub fn new(n: usize, width: usize, rank_tol: f64) -> Result<Self> {
        if rank_tol.is_nan() || rank_tol < 0.0 {
            return Err(Error::BadParams(format!("rank tolerance {rank_tol}")));
        }
        Ok(Self {
            window: WindowBuffer::new(n, width)?,
            gram: GramState::empty(width),
            rank_tol,
            time_base: 0,
        })
    }

    /// Engine with the default rank tolerance for the storage precision.
    pub fn with_default_tol(n: usize, width: usize) -> Result<Self> {
        Self::new(n, width, T::PRECISION.default_rank_tol())
    }

    pub fn window(&self) -> &WindowBuffer<T> {
        &self.window
    }

    pub fn gram(&self) -> &GramState {
        &self.gram
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// Stream index of the oldest column in the window.
    pub fn time_base(&self) -> u64 {
        self.time_base
    }

    pub fn is_warm(&self) -> bool {
        self.window.is_full()
    }

    /// Appends a column, evicting the oldest once the window is full.
    pub fn push(&mut self, col: &[T]) -> Result<()> {
        if self.is_warm() {
            slide_update(&mut self.gram, &mut self.window, col)?;
            self.time_base += 1;
            Ok(())
        } else {
            warmup_append(&mut self.gram, &mut self.window, col)
        }
    }

    /// [`push`](Self::push) for a column given as sorted indices and values.
    pub fn push_sparse(&mut self, indices: &[usize], values: &[T]) -> Result<()> {
        if self.is_warm() {
            slide_update_sparse(&mut self.gram, &mut self.window, indices, values)?;
            self.time_base += 1;
            Ok(())
        } else {
            warmup_append_sparse(&mut self.gram, &mut self.window, indices, values)
        }
    }

    /// SVD of every column currently in the window.
    pub fn svd(&self) -> Result<SvdFactors> {
        if self.gram.filled() == 0 {
            return Err(Error::WindowNotFull {
                filled: 0,
                width: self.window.width(),
            });
        }
        svd_from_gram(&self.gram.matrix(), self.rank_tol)
    }

    /// Slides `col` in, then decomposes the new window. The slide is kept
    /// even if the decomposition fails.
    pub fn svd_step(&mut self, col: &[T]) -> Result<SvdFactors> {
        if !self.is_warm() {
            return Err(self.not_full());
        }
        self.push(col)?;
        self.svd()
    }

    /// DMD of the current full window.
    pub fn dmd(&self) -> Result<DmdFactors> {
        if !self.is_warm() {
            return Err(self.not_full());
        }
        dmd_from_gram(&self.window, &self.gram, self.rank_tol, self.time_base)
    }

    /// Slides `col` in and returns the DMD of the new window. On any error
    /// the engine is left exactly as it was.
    pub fn dmd_step(&mut self, col: &[T]) -> Result<DmdFactors> {
        if !self.is_warm() {
            return Err(self.not_full());
        }
        let next = slid_gram(&self.gram, &self.window, col)?;
        let d = dmd_from_gram(
            &SlidView::new(&self.window, col),
            &next,
            self.rank_tol,
            self.time_base + 1,
        )?;
        self.commit(next, |w| w.push_unchecked(col));
        Ok(d)
    }

    /// [`dmd_step`](Self::dmd_step) for a sparse column.
    pub fn dmd_step_sparse(&mut self, indices: &[usize], values: &[T]) -> Result<DmdFactors> {
        if !self.is_warm() {
            return Err(self.not_full());
        }
        let next = slid_gram_sparse(&self.gram, &self.window, indices, values)?;
        let mut dense = vec![T::default(); self.window.n()];
        for (&i, &v) in indices.iter().zip(values) {
            dense[i] = v;
        }
        let d = dmd_from_gram(
            &SlidView::new(&self.window, &dense),
            &next,
            self.rank_tol,
            self.time_base + 1,
        )?;
        self.commit(next, |w| w.push_sparse_unchecked(indices, values));
        Ok(d)
    }

    fn commit(&mut self, gram: GramState, push: impl FnOnce(&mut WindowBuffer<T>)) {
        push(&mut self.window);
        self.gram = gram;
        self.time_base += 1;
    }

    fn not_full(&self) -> Error {
        Error::WindowNotFull {
            filled: self.window.filled(),
            width: self.window.width(),
        }
    }
}
