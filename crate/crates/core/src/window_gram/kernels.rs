//! Inner-product kernels over stored snapshot columns.
//!
//! Every length-n inner product in the crate goes through [`dot`], which
//! sums fixed-size row chunks in order. The blocked Gram kernel uses the
//! same chunk partials, so an entry computed by a slide update is bitwise
//! identical to the one a full recomputation produces.

use rayon::prelude::*;

use crate::scalar::Real;
use crate::smalldense::Mat;

/// Rows per cache block.
pub const CHUNK: usize = 4096;

#[inline]
fn chunk_dot<T: Real, U: Real>(a: &[T], b: &[U]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let mut ai = a.chunks_exact(8);
    let mut bi = b.chunks_exact(8);
    for (x, y) in (&mut ai).zip(&mut bi) {
        for k in 0..8 {
            acc[k] += x[k].to_f64() * y[k].to_f64();
        }
    }
    let mut tail = 0.0;
    for (x, y) in ai.remainder().iter().zip(bi.remainder()) {
        tail += x.to_f64() * y.to_f64();
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Inner product accumulated in double precision.
pub fn dot<T: Real, U: Real>(a: &[T], b: &[U]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.chunks(CHUNK).zip(b.chunks(CHUNK)) {
        s += chunk_dot(x, y);
    }
    s
}

/// Inner products of `new` against every column in `cols`, bitwise equal to
/// calling [`dot`] per column but streaming each column through the cache
/// once.
pub fn dots_against<T: Real, U: Real>(cols: &[&[T]], new: &[U]) -> Vec<f64> {
    let groups = rayon::current_num_threads().max(1);
    let per = cols.len().div_ceil(groups).max(1);
    cols.par_chunks(per)
        .flat_map_iter(|group| {
            let mut acc = vec![0.0; group.len()];
            let mut start = 0;
            while start < new.len() {
                let end = (start + CHUNK).min(new.len());
                let nc = &new[start..end];
                for (a, c) in acc.iter_mut().zip(group) {
                    *a += chunk_dot(&c[start..end], nc);
                }
                start = end;
            }
            acc
        })
        .collect()
}

/// Upper triangle of the Gram matrix of `cols`: row `i` holds the entries
/// `(i, i..m)`. Entry `(i, j)` is bitwise equal to `dot(cols[i], cols[j])`.
pub fn gram_upper<T: Real>(cols: &[&[T]]) -> Vec<Vec<f64>> {
    let m = cols.len();
    let n = cols.first().map_or(0, |c| c.len());
    let per = m.div_ceil(rayon::current_num_threads().max(1)).max(1);
    let starts: Vec<usize> = (0..m).step_by(per).collect();
    starts
        .par_iter()
        .flat_map_iter(|&r0| {
            let r1 = (r0 + per).min(m);
            let mut rows: Vec<Vec<f64>> = (r0..r1).map(|i| vec![0.0; m - i]).collect();
            let mut start = 0;
            while start < n {
                let end = (start + CHUNK).min(n);
                for (i, row) in (r0..r1).zip(rows.iter_mut()) {
                    let ci = &cols[i][start..end];
                    for (g, cj) in row.iter_mut().zip(&cols[i..]) {
                        *g += chunk_dot(ci, &cj[start..end]);
                    }
                }
                start = end;
            }
            rows
        })
        .collect()
}

/// `Z * C` for the `n x m` snapshot matrix `Z` given by `cols` and a small
/// `m x r` coefficient matrix; the result is `n x r`.
pub fn combine<T: Real>(cols: &[&[T]], coeffs: &Mat) -> Mat {
    assert_eq!(cols.len(), coeffs.rows());
    let n = cols.first().map_or(0, |c| c.len());
    let r = coeffs.cols();
    let blocks: Vec<(usize, Vec<f64>)> = (0..n)
        .step_by(CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let end = (start + CHUNK).min(n);
            let len = end - start;
            let mut out = vec![0.0; len * r];
            for k in 0..r {
                let o = &mut out[k * len..(k + 1) * len];
                for (j, c) in cols.iter().enumerate() {
                    let a = coeffs[(j, k)];
                    if a == 0.0 {
                        continue;
                    }
                    for (x, y) in o.iter_mut().zip(&c[start..end]) {
                        *x += a * y.to_f64();
                    }
                }
            }
            (start, out)
        })
        .collect();
    let mut z = Mat::zeros(n, r);
    for (start, out) in blocks {
        let len = out.len() / r.max(1);
        for k in 0..r {
            z.col_mut(k)[start..start + len].copy_from_slice(&out[k * len..(k + 1) * len]);
        }
    }
    z
}
