use num_complex::Complex64;
use rayon::prelude::*;

use super::{CMat, Mat};
use crate::error::{Error, Result};

/// Whether an operand enters the product as-is or transposed.
///
/// For complex operands `Trans` means the conjugate transpose.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    NoTrans,
    Trans,
}

fn shape(rows: usize, cols: usize, op: Op) -> (usize, usize) {
    match op {
        Op::NoTrans => (rows, cols),
        Op::Trans => (cols, rows),
    }
}

/// `op(a) * op(b)`.
pub fn gemm(a: &Mat, ta: Op, b: &Mat, tb: Op) -> Result<Mat> {
    let (m, ka) = shape(a.rows(), a.cols(), ta);
    let (kb, n) = shape(b.rows(), b.cols(), tb);
    if ka != kb {
        return Err(Error::dims(
            format!("inner dimension {ka}"),
            format!("inner dimension {kb}"),
        ));
    }
    let mut out = Mat::zeros(m, n);
    if m == 0 {
        return Ok(out);
    }
    out.as_mut_slice()
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(j, col)| match (ta, tb) {
            (Op::NoTrans, Op::NoTrans) => {
                for k in 0..ka {
                    let bkj = b[(k, j)];
                    if bkj != 0.0 {
                        col.iter_mut().zip(a.col(k)).for_each(|(c, &x)| *c += x * bkj);
                    }
                }
            }
            (Op::Trans, Op::NoTrans) => {
                let bj = b.col(j);
                for (i, c) in col.iter_mut().enumerate() {
                    *c = a.col(i).iter().zip(bj).map(|(x, y)| x * y).sum();
                }
            }
            (Op::NoTrans, Op::Trans) => {
                for k in 0..ka {
                    let bjk = b[(j, k)];
                    if bjk != 0.0 {
                        col.iter_mut().zip(a.col(k)).for_each(|(c, &x)| *c += x * bjk);
                    }
                }
            }
            (Op::Trans, Op::Trans) => {
                for (i, c) in col.iter_mut().enumerate() {
                    *c = (0..ka).map(|k| a[(k, i)] * b[(j, k)]).sum();
                }
            }
        });
    Ok(out)
}

/// `op(a) * op(b)` for complex operands, `Trans` being the conjugate transpose.
pub fn cgemm(a: &CMat, ta: Op, b: &CMat, tb: Op) -> Result<CMat> {
    let (m, ka) = shape(a.rows(), a.cols(), ta);
    let (kb, n) = shape(b.rows(), b.cols(), tb);
    if ka != kb {
        return Err(Error::dims(
            format!("inner dimension {ka}"),
            format!("inner dimension {kb}"),
        ));
    }
    let at = |i: usize, k: usize| match ta {
        Op::NoTrans => a[(i, k)],
        Op::Trans => a[(k, i)].conj(),
    };
    let bt = |k: usize, j: usize| match tb {
        Op::NoTrans => b[(k, j)],
        Op::Trans => b[(j, k)].conj(),
    };
    let mut out = CMat::zeros(m, n);
    if m == 0 {
        return Ok(out);
    }
    out.as_mut_slice()
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(j, col)| {
            for k in 0..ka {
                let bkj = bt(k, j);
                for (i, c) in col.iter_mut().enumerate() {
                    *c += at(i, k) * bkj;
                }
            }
        });
    Ok(out)
}

/// Real matrix times complex matrix.
pub fn rc_gemm(a: &Mat, b: &CMat) -> Result<CMat> {
    cgemm(&a.to_complex(), Op::NoTrans, b, Op::NoTrans)
}

/// Complex matrix times complex vector.
pub fn cmatvec(a: &CMat, x: &[Complex64]) -> Result<Vec<Complex64>> {
    if a.cols() != x.len() {
        return Err(Error::dims(a.cols(), x.len()));
    }
    let mut y = vec![Complex64::new(0.0, 0.0); a.rows()];
    for (k, &xk) in x.iter().enumerate() {
        y.iter_mut().zip(a.col(k)).for_each(|(yi, &aik)| *yi += aik * xk);
    }
    Ok(y)
}
