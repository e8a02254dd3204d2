use super::buffer::{ColumnSource, WindowBuffer};
use super::kernels::{dots_against, gram_upper};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::smalldense::Mat;

/// Gram matrix `Z^T Z` of the window in logical column order.
///
/// During warm-up only the leading `filled x filled` block is valid.
#[derive(Clone, Debug, PartialEq)]
pub struct GramState {
    g: Mat,
    filled: usize,
    inner_products: u64,
}

impl GramState {
    pub fn empty(width: usize) -> Self {
        Self {
            g: Mat::zeros(width, width),
            filled: 0,
            inner_products: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.g.rows()
    }

    pub fn filled(&self) -> usize {
        self.filled
    }

    /// Total length-n inner products evaluated since this state was created.
    pub fn inner_products(&self) -> u64 {
        self.inner_products
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.filled && j < self.filled);
        self.g[(i, j)]
    }

    /// The valid `filled x filled` Gram matrix.
    pub fn matrix(&self) -> Mat {
        self.g.block(0, 0, self.filled, self.filled)
    }

    /// Block of the Gram matrix; used to read `X^T X` and `X^T X'` without
    /// touching the snapshots.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Mat {
        assert!(r0 + rows <= self.filled && c0 + cols <= self.filled);
        self.g.block(r0, c0, rows, cols)
    }
}

/// Full Gram of the current window columns by a blocked dense product.
pub fn init_gram<T: Real, S: ColumnSource<T> + ?Sized>(window: &S) -> Result<GramState> {
    let m = window.ncols();
    if m < 2 {
        return Err(Error::BadParams(format!(
            "Gram needs at least 2 columns, got {m}"
        )));
    }
    let cols = window.columns();
    if cols.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite);
    }
    let upper = gram_upper(&cols);
    let mut g = Mat::zeros(m, m);
    for (i, row) in upper.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            g[(i, i + k)] = v;
            g[(i + k, i)] = v;
        }
    }
    Ok(GramState {
        g,
        filled: m,
        inner_products: (m * (m + 1) / 2) as u64,
    })
}

/// Gram of the window after sliding in `new`, computed from `state` with
/// only `w` fresh inner products. Neither argument is modified.
pub fn slid_gram<T: Real>(
    state: &GramState,
    window: &WindowBuffer<T>,
    new: &[T],
) -> Result<GramState> {
    let w = window.width();
    if !window.is_full() || state.filled != w {
        return Err(Error::WindowNotFull {
            filled: window.filled(),
            width: w,
        });
    }
    window.check(new)?;
    let mut cols: Vec<&[T]> = (1..w).map(|j| window.column(j)).collect();
    cols.push(new);
    let fresh = dots_against(&cols, new);
    Ok(shifted(state, &fresh))
}

/// Sparse counterpart of [`slid_gram`]: `new` is given by sorted indices
/// and values, and the fresh products are sparse-dense dots.
pub fn slid_gram_sparse<T: Real>(
    state: &GramState,
    window: &WindowBuffer<T>,
    indices: &[usize],
    values: &[T],
) -> Result<GramState> {
    let w = window.width();
    if !window.is_full() || state.filled != w {
        return Err(Error::WindowNotFull {
            filled: window.filled(),
            width: w,
        });
    }
    check_sparse(window, indices, values)?;
    let mut fresh: Vec<f64> = (1..w)
        .map(|j| {
            let c = window.column(j);
            indices
                .iter()
                .zip(values)
                .map(|(&i, v)| c[i].to_f64() * v.to_f64())
                .sum()
        })
        .collect();
    fresh.push(values.iter().map(|v| v.to_f64() * v.to_f64()).sum());
    Ok(shifted(state, &fresh))
}

pub(crate) fn check_sparse<T: Real>(
    window: &WindowBuffer<T>,
    indices: &[usize],
    values: &[T],
) -> Result<()> {
    if indices.len() != values.len() {
        return Err(Error::dims(indices.len(), values.len()));
    }
    if let Some(&i) = indices.iter().find(|&&i| i >= window.n()) {
        return Err(Error::dims(format!("index < {}", window.n()), i));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn shifted(state: &GramState, fresh: &[f64]) -> GramState {
    let w = state.width();
    let mut g = Mat::zeros(w, w);
    for j in 0..w - 1 {
        for i in 0..w - 1 {
            g[(i, j)] = state.g[(i + 1, j + 1)];
        }
    }
    for (i, &v) in fresh.iter().enumerate() {
        g[(i, w - 1)] = v;
        g[(w - 1, i)] = v;
    }
    GramState {
        g,
        filled: w,
        inner_products: state.inner_products + w as u64,
    }
}

/// Evicts the oldest column, appends `new`, and updates the Gram with one
/// fresh row. Both arguments are left untouched on error.
pub fn slide_update<T: Real>(
    state: &mut GramState,
    window: &mut WindowBuffer<T>,
    new: &[T],
) -> Result<()> {
    let next = slid_gram(state, window, new)?;
    window.push_unchecked(new);
    *state = next;
    Ok(())
}

/// Appends `new` during warm-up, extending the Gram by one row.
pub fn warmup_append<T: Real>(
    state: &mut GramState,
    window: &mut WindowBuffer<T>,
    new: &[T],
) -> Result<()> {
    let k = window.filled();
    if k == window.width() {
        return Err(Error::WindowFull {
            width: window.width(),
        });
    }
    window.check(new)?;
    let mut cols: Vec<&[T]> = (0..k).map(|j| window.column(j)).collect();
    cols.push(new);
    let fresh = dots_against(&cols, new);
    for (i, &v) in fresh.iter().enumerate() {
        state.g[(i, k)] = v;
        state.g[(k, i)] = v;
    }
    state.filled = k + 1;
    state.inner_products += fresh.len() as u64;
    window.push_unchecked(new);
    Ok(())
}

/// Sparse counterpart of [`warmup_append`].
pub fn warmup_append_sparse<T: Real>(
    state: &mut GramState,
    window: &mut WindowBuffer<T>,
    indices: &[usize],
    values: &[T],
) -> Result<()> {
    let k = window.filled();
    if k == window.width() {
        return Err(Error::WindowFull {
            width: window.width(),
        });
    }
    check_sparse(window, indices, values)?;
    for j in 0..k {
        let c = window.column(j);
        let v: f64 = indices
            .iter()
            .zip(values)
            .map(|(&i, v)| c[i].to_f64() * v.to_f64())
            .sum();
        state.g[(j, k)] = v;
        state.g[(k, j)] = v;
    }
    state.g[(k, k)] = values.iter().map(|v| v.to_f64() * v.to_f64()).sum();
    state.filled = k + 1;
    state.inner_products += (k + 1) as u64;
    window.push_sparse_unchecked(indices, values);
    Ok(())
}

/// Evicting/appending sparse update; see [`slide_update`].
pub fn slide_update_sparse<T: Real>(
    state: &mut GramState,
    window: &mut WindowBuffer<T>,
    indices: &[usize],
    values: &[T],
) -> Result<()> {
    let next = slid_gram_sparse(state, window, indices, values)?;
    window.push_sparse_unchecked(indices, values);
    *state = next;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smalldense::sym_eig;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cols(n: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    /// Scalar-loop oracle, independent of the blocked kernels.
    fn oracle_gram(cols: &[Vec<f64>]) -> Mat {
        let m = cols.len();
        Mat::from_fn(m, m, |i, j| {
            let mut s = 0.0;
            for k in 0..cols[i].len() {
                s += cols[i][k] * cols[j][k];
            }
            s
        })
    }

    fn rel_diff(a: &Mat, b: &Mat) -> f64 {
        a.max_abs_diff(b) / b.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn filled_window(cols: &[Vec<f64>]) -> (GramState, WindowBuffer<f64>) {
        let mut w = WindowBuffer::new(cols[0].len(), cols.len()).unwrap();
        let mut g = GramState::empty(cols.len());
        for c in cols {
            warmup_append(&mut g, &mut w, c).unwrap();
        }
        (g, w)
    }

    #[test]
    fn identity_columns() {
        let cols = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let w = WindowBuffer::from_columns(cols.as_slice()).unwrap();
        assert_eq!(init_gram(&w).unwrap().matrix(), Mat::identity(3));
    }

    #[test]
    fn repeated_column() {
        let cols = vec![vec![3.0, 4.0], vec![3.0, 4.0]];
        let w = WindowBuffer::from_columns(cols.as_slice()).unwrap();
        let g = init_gram(&w).unwrap().matrix();
        assert_eq!(g.as_slice(), &[25.0, 25.0, 25.0, 25.0]);
    }

    #[test]
    fn init_matches_scalar_oracle() {
        let cols = random_cols(200, 8, 4);
        let w = WindowBuffer::from_columns(cols.as_slice()).unwrap();
        let g = init_gram(&w).unwrap().matrix();
        assert!(rel_diff(&g, &oracle_gram(&cols)) < 1e-12);
    }

    #[test]
    fn zero_column_slides_in_as_zero_row() {
        let cols = random_cols(20, 4, 5);
        let (mut g, mut w) = filled_window(&cols);
        slide_update(&mut g, &mut w, &[0.0; 20]).unwrap();
        for i in 0..4 {
            assert_eq!(g.get(i, 3), 0.0);
            assert_eq!(g.get(3, i), 0.0);
        }
    }

    #[test]
    fn identity_slide_by_hand() {
        let cols = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let (mut g, mut w) = filled_window(&cols);
        slide_update(&mut g, &mut w, &[1.0, 0.0, 0.0]).unwrap();
        // logical order (e2, e3, e1) is still orthonormal
        assert_eq!(g.matrix(), Mat::identity(3));
        assert_eq!(w.column(2), &[1.0, 0.0, 0.0]);
        // sliding e2 in again repeats a retained column: (e3, e1, e2) -> I, then (e1, e2, e2)
        slide_update(&mut g, &mut w, &[0.0, 1.0, 0.0]).unwrap();
        slide_update(&mut g, &mut w, &[0.0, 1.0, 0.0]).unwrap();
        let want = Mat::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 1.0], &[0.0, 1.0, 1.0]]).unwrap();
        assert_eq!(g.matrix(), want);
    }

    #[test]
    fn slide_copies_retained_block() {
        let cols = random_cols(50, 5, 6);
        let (g0, w0) = filled_window(&cols);
        let new: Vec<f64> = random_cols(50, 1, 7).remove(0);
        let g1 = slid_gram(&g0, &w0, &new).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(g1.get(i, j), g0.get(i + 1, j + 1));
            }
        }
        assert_eq!(g1.inner_products() - g0.inner_products(), 5);
    }

    #[test]
    fn errors_leave_state_untouched() {
        let cols = random_cols(10, 3, 8);
        let mut w = WindowBuffer::new(10, 3).unwrap();
        let mut g = GramState::empty(3);
        warmup_append(&mut g, &mut w, &cols[0]).unwrap();
        assert!(matches!(
            slide_update(&mut g, &mut w, &cols[1]),
            Err(Error::WindowNotFull { .. })
        ));
        warmup_append(&mut g, &mut w, &cols[1]).unwrap();
        warmup_append(&mut g, &mut w, &cols[2]).unwrap();
        assert!(matches!(
            warmup_append(&mut g, &mut w, &cols[0]),
            Err(Error::WindowFull { .. })
        ));
        let before = (g.clone(), w.columns().iter().map(|c| c.to_vec()).collect::<Vec<_>>());
        let mut bad = cols[0].clone();
        bad[3] = f64::NAN;
        assert!(matches!(slide_update(&mut g, &mut w, &bad), Err(Error::NonFinite)));
        assert!(matches!(
            slide_update(&mut g, &mut w, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(g, before.0);
        let after: Vec<Vec<f64>> = w.columns().iter().map(|c| c.to_vec()).collect();
        assert_eq!(after, before.1);
    }

    #[test]
    fn warmup_first_append() {
        let mut w = WindowBuffer::new(2, 3).unwrap();
        let mut g = GramState::empty(3);
        warmup_append(&mut g, &mut w, &[3.0, 4.0]).unwrap();
        assert_eq!(g.filled(), 1);
        assert_eq!(g.matrix().as_slice(), &[25.0]);
        let mut w = WindowBuffer::new(2, 2).unwrap();
        let mut g = GramState::empty(2);
        warmup_append(&mut g, &mut w, &[1.0, 0.0]).unwrap();
        warmup_append(&mut g, &mut w, &[0.0, 1.0]).unwrap();
        assert_eq!(g.matrix(), Mat::identity(2));
    }

    #[test]
    fn warmup_matches_init() {
        let cols = random_cols(300, 7, 9);
        let (g, w) = filled_window(&cols);
        let batch = init_gram(&w).unwrap();
        assert!(rel_diff(&g.matrix(), &batch.matrix()) < 1e-12);
    }

    #[test]
    fn sparse_slide_matches_dense() {
        let cols = random_cols(40, 4, 10);
        let (g0, w0) = filled_window(&cols);
        let idx = vec![2, 17, 33];
        let vals = vec![0.5, -1.5, 2.0];
        let mut dense = vec![0.0; 40];
        for (&i, &v) in idx.iter().zip(&vals) {
            dense[i] = v;
        }
        let a = slid_gram(&g0, &w0, &dense).unwrap();
        let b = slid_gram_sparse(&g0, &w0, &idx, &vals).unwrap();
        assert!(a.matrix().max_abs_diff(&b.matrix()) < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn streaming_equals_batch(n in 1usize..300, w in 2usize..12, extra in 10usize..30, seed in any::<u64>()) {
            let cols = random_cols(n, w + extra, seed);
            let (mut g, mut win) = filled_window(&cols[..w]);
            for c in &cols[w..] {
                slide_update(&mut g, &mut win, c).unwrap();
            }
            let oracle = oracle_gram(&cols[cols.len() - w..]);
            prop_assert!(rel_diff(&g.matrix(), &oracle) < 1e-10);
            prop_assert_eq!(g.inner_products() as usize, w * (w + 1) / 2 + extra * w);

            let eig = sym_eig(&g.matrix()).unwrap();
            let trace: f64 = (0..w).map(|i| g.get(i, i)).sum();
            prop_assert!(eig.values.iter().all(|&l| l >= -1e-10 * trace));
        }
    }
}
