use num_complex::Complex64;

use super::CMat;
use crate::error::{Error, Result};

/// Least-squares solution and the numerical rank it was computed with.
#[derive(Clone, Debug)]
pub struct LstsqSolution {
    pub x: Vec<Complex64>,
    pub rank: usize,
    /// Set when the numerical rank is below the column count; `x` is then
    /// the minimum-norm minimizer.
    pub rank_deficient: bool,
}

/// Singular values below `RCOND * sigma_max` count as zero.
const RCOND: f64 = 1e-12;
const MAX_SWEEPS: usize = 60;

/// Minimizes `|A x - rhs|_2` for a complex `p x q` matrix with `p >= q`.
pub fn solve_ls(a: &CMat, rhs: &[Complex64]) -> Result<LstsqSolution> {
    let (p, q) = (a.rows(), a.cols());
    if rhs.len() != p {
        return Err(Error::dims(format!("rhs of length {p}"), rhs.len()));
    }
    if q == 0 || p < q {
        return Err(Error::dims(
            "p >= q >= 1",
            format!("{p} x {q}"),
        ));
    }
    if !a.is_finite() || rhs.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite);
    }

    let (u, sigma, v) = jacobi_svd(a);
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let cutoff = RCOND * smax;
    let mut x = vec![Complex64::new(0.0, 0.0); q];
    let mut rank = 0;
    for k in 0..q {
        if sigma[k] <= cutoff || sigma[k] == 0.0 {
            continue;
        }
        rank += 1;
        // coefficient (u_k^H rhs) / sigma_k along v_k
        let c: Complex64 = u
            .col(k)
            .iter()
            .zip(rhs)
            .map(|(ui, bi)| ui.conj() * bi)
            .sum::<Complex64>()
            / sigma[k];
        x.iter_mut().zip(v.col(k)).for_each(|(xi, &vi)| *xi += vi * c);
    }
    Ok(LstsqSolution {
        x,
        rank,
        rank_deficient: rank < q,
    })
}

/// One-sided (Hestenes) Jacobi SVD: returns `U` with unit (or zero)
/// columns, the singular values, and unitary `V` with `A = U S V^H`.
fn jacobi_svd(a: &CMat) -> (CMat, Vec<f64>, CMat) {
    let q = a.cols();
    let mut w = a.clone();
    let mut v = CMat::identity(q);
    let tol = f64::EPSILON * (a.rows() as f64).sqrt();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..q {
            for j in (i + 1)..q {
                let (alpha, beta, gamma) = {
                    let ci = w.col(i);
                    let cj = w.col(j);
                    let alpha: f64 = ci.iter().map(|z| z.norm_sqr()).sum();
                    let beta: f64 = cj.iter().map(|z| z.norm_sqr()).sum();
                    let gamma: Complex64 = ci.iter().zip(cj).map(|(x, y)| x.conj() * y).sum();
                    (alpha, beta, gamma)
                };
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let phase = gamma / g;
                rotate(&mut w, i, j, c, s, phase);
                rotate(&mut v, i, j, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma = vec![0.0; q];
    for k in 0..q {
        let col = w.col_mut(k);
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        sigma[k] = norm;
        if norm > 0.0 {
            col.iter_mut().for_each(|z| *z /= norm);
        }
    }
    (w, sigma, v)
}

/// Applies the unitary column rotation
/// `[c_i c_j] <- [c_i c_j] [[c, s e^{i phi}], [-s e^{-i phi}, c]]`.
fn rotate(m: &mut CMat, i: usize, j: usize, c: f64, s: f64, phase: Complex64) {
    let rows = m.rows();
    let data = m.as_mut_slice();
    let (left, right) = data.split_at_mut(j * rows);
    let ci = &mut left[i * rows..(i + 1) * rows];
    let cj = &mut right[..rows];
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let xi = *x;
        let yj = *y;
        *x = xi * c - yj * phase.conj() * s;
        *y = xi * phase * s + yj * c;
    }
}
