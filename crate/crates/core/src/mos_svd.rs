//! Method-of-snapshots SVD: singular values and right singular vectors from
//! the eigendecomposition of the Gram matrix, left vectors on demand.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::smalldense::{sym_eig, Mat};
use crate::window_gram::kernels::combine;
use crate::window_gram::ColumnSource;

/// Truncated thin SVD factors `sigma` and `V` of an `n x m` snapshot block.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    /// Singular values, strictly positive and descending.
    pub sigma: Vec<f64>,
    /// `m x rank` right singular vectors.
    pub v: Mat,
    pub rank: usize,
    /// Number of snapshots decomposed.
    pub m: usize,
}

impl SvdFactors {
    /// `V * diag(1 / sigma)`.
    pub fn v_sigma_inv(&self) -> Mat {
        Mat::from_fn(self.m, self.rank, |i, k| self.v[(i, k)] / self.sigma[k])
    }
}

/// SVD factors from a symmetric Gram matrix `Z^T Z`.
///
/// Singular values are `sqrt(|lambda|)` of the Gram eigenvalues; those at or
/// below `rank_tol * sigma_max` are dropped along with their vectors.
pub fn svd_from_gram(gram: &Mat, rank_tol: f64) -> Result<SvdFactors> {
    if rank_tol.is_nan() || rank_tol < 0.0 {
        return Err(Error::BadParams(format!("rank tolerance {rank_tol}")));
    }
    let m = gram.rows();
    let eig = sym_eig(gram)?;
    let mut order: Vec<(f64, usize)> = eig
        .values
        .iter()
        .enumerate()
        .map(|(i, &l)| (l.abs().sqrt(), i))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let top = order.first().map_or(0.0, |o| o.0);
    if top == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let kept: Vec<(f64, usize)> = order
        .into_iter()
        .take_while(|&(s, _)| s > rank_tol * top)
        .collect();
    let rank = kept.len();
    let v = Mat::from_fn(m, rank, |i, k| eig.vectors[(i, kept[k].1)]);
    Ok(SvdFactors {
        sigma: kept.iter().map(|k| k.0).collect(),
        v,
        rank,
        m,
    })
}

/// Left singular vectors `U = Z V diag(1 / sigma)` as an `n x rank` matrix.
pub fn left_singular<T: Real, S: ColumnSource<T> + ?Sized>(
    z: &S,
    f: &SvdFactors,
) -> Result<Mat> {
    if z.ncols() != f.m {
        return Err(Error::dims(format!("{} snapshots", f.m), z.ncols()));
    }
    if f.rank == 0 {
        return Err(Error::RankCollapse);
    }
    Ok(combine(&z.columns(), &f.v_sigma_inv()))
}
