use crate::error::{Error, Result};
use crate::scalar::Real;

/// Read access to a sequence of equal-length columns in logical order.
pub trait ColumnSource<T: Real>: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn column(&self, j: usize) -> &[T];

    fn columns(&self) -> Vec<&[T]> {
        (0..self.ncols()).map(|j| self.column(j)).collect()
    }
}

impl ColumnSource<f64> for crate::smalldense::Mat {
    fn nrows(&self) -> usize {
        self.rows()
    }

    fn ncols(&self) -> usize {
        self.cols()
    }

    fn column(&self, j: usize) -> &[f64] {
        self.col(j)
    }
}

impl<T: Real> ColumnSource<T> for [Vec<T>] {
    fn nrows(&self) -> usize {
        self.first().map_or(0, |c| c.len())
    }

    fn ncols(&self) -> usize {
        self.len()
    }

    fn column(&self, j: usize) -> &[T] {
        &self[j]
    }
}

/// Contiguous range of columns of another source.
pub struct ColumnRange<'a, S: ?Sized> {
    src: &'a S,
    start: usize,
    len: usize,
}

impl<'a, S: ?Sized> ColumnRange<'a, S> {
    pub fn new<T: Real>(src: &'a S, start: usize, len: usize) -> Self
    where
        S: ColumnSource<T>,
    {
        assert!(start + len <= src.ncols(), "column range out of bounds");
        Self { src, start, len }
    }
}

impl<T: Real, S: ColumnSource<T> + ?Sized> ColumnSource<T> for ColumnRange<'_, S> {
    fn nrows(&self) -> usize {
        self.src.nrows()
    }

    fn ncols(&self) -> usize {
        self.len
    }

    fn column(&self, j: usize) -> &[T] {
        assert!(j < self.len);
        self.src.column(self.start + j)
    }
}

/// Fixed-capacity ring of snapshot columns.
///
/// Columns are addressed in logical order, oldest first, independent of
/// where they sit in the ring.
#[derive(Clone, Debug)]
pub struct WindowBuffer<T> {
    n: usize,
    width: usize,
    data: Vec<T>,
    head: usize,
    filled: usize,
}

impl<T: Real> WindowBuffer<T> {
    pub fn new(n: usize, width: usize) -> Result<Self> {
        if width < 2 {
            return Err(Error::BadParams(format!("window width {width} < 2")));
        }
        if n == 0 {
            return Err(Error::BadParams("snapshot length must be positive".into()));
        }
        Ok(Self {
            n,
            width,
            data: vec![T::default(); n * width],
            head: 0,
            filled: 0,
        })
    }

    /// Full window built from existing columns.
    pub fn from_columns<S: ColumnSource<T> + ?Sized>(src: &S) -> Result<Self> {
        let mut w = Self::new(src.nrows(), src.ncols())?;
        for j in 0..src.ncols() {
            w.check(src.column(j))?;
            w.push_unchecked(src.column(j));
        }
        Ok(w)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn filled(&self) -> usize {
        self.filled
    }

    pub fn is_full(&self) -> bool {
        self.filled == self.width
    }

    /// Validates a candidate column without touching the buffer.
    pub fn check<U: Real>(&self, col: &[U]) -> Result<()> {
        if col.len() != self.n {
            return Err(Error::dims(
                format!("column of length {}", self.n),
                col.len(),
            ));
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    fn slot(&self, logical: usize) -> usize {
        (self.head + logical) % self.width
    }

    fn slot_mut(&mut self, slot: usize) -> &mut [T] {
        &mut self.data[slot * self.n..(slot + 1) * self.n]
    }

    /// Appends during warm-up, or overwrites the oldest column once full.
    pub(crate) fn push_unchecked(&mut self, col: &[T]) {
        let slot = if self.filled < self.width {
            let s = self.slot(self.filled);
            self.filled += 1;
            s
        } else {
            let s = self.head;
            self.head = (self.head + 1) % self.width;
            s
        };
        self.slot_mut(slot).copy_from_slice(col);
    }

    /// Like [`push_unchecked`](Self::push_unchecked) but writes a sparse
    /// column given as sorted `(index, value)` pairs.
    pub(crate) fn push_sparse_unchecked(&mut self, indices: &[usize], values: &[T]) {
        let slot = if self.filled < self.width {
            let s = self.slot(self.filled);
            self.filled += 1;
            s
        } else {
            let s = self.head;
            self.head = (self.head + 1) % self.width;
            s
        };
        let dst = self.slot_mut(slot);
        dst.iter_mut().for_each(|v| *v = T::default());
        for (&i, &v) in indices.iter().zip(values) {
            dst[i] = v;
        }
    }
}

impl<T: Real> ColumnSource<T> for WindowBuffer<T> {
    fn nrows(&self) -> usize {
        self.n
    }

    fn ncols(&self) -> usize {
        self.filled
    }

    fn column(&self, j: usize) -> &[T] {
        assert!(j < self.filled, "column {j} beyond filled {}", self.filled);
        let s = self.slot(j);
        &self.data[s * self.n..(s + 1) * self.n]
    }
}

/// The window as it would look after sliding in `new`: the oldest column
/// dropped and `new` appended, without modifying the buffer.
pub struct SlidView<'a, T> {
    window: &'a WindowBuffer<T>,
    new: &'a [T],
}

impl<'a, T: Real> SlidView<'a, T> {
    pub fn new(window: &'a WindowBuffer<T>, new: &'a [T]) -> Self {
        assert!(window.is_full());
        assert_eq!(new.len(), window.n);
        Self { window, new }
    }
}

impl<T: Real> ColumnSource<T> for SlidView<'_, T> {
    fn nrows(&self) -> usize {
        self.window.n
    }

    fn ncols(&self) -> usize {
        self.window.width
    }

    fn column(&self, j: usize) -> &[T] {
        if j + 1 == self.window.width {
            self.new
        } else {
            self.window.column(j + 1)
        }
    }
}
