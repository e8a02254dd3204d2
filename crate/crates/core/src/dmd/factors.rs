use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mos_svd::{svd_from_gram, SvdFactors};
use crate::scalar::Real;
use crate::smalldense::{cmatvec, eig, gemm, rc_gemm, solve_ls, CMat, Mat, Op};
use crate::window_gram::kernels::combine;
use crate::window_gram::{init_gram, ColumnRange, ColumnSource, GramState};

/// Projected operator `A~ = (V S^-1)^T (X^T X') (V S^-1)` and the scaled
/// right singular vectors it was built from.
#[derive(Clone, Debug)]
pub struct AtildeBlock {
    pub atilde: Mat,
    /// `V * diag(1 / sigma)`, `(w - 1) x r`.
    pub vsi: Mat,
}

/// Amplitudes fitted to the first snapshot of the window.
#[derive(Clone, Debug)]
pub struct Amplitudes {
    pub b: Vec<Complex64>,
    /// Set when `W diag(lambda)` was numerically singular and a minimum-norm
    /// fit (or zero amplitudes for vanishing eigenvalues) was used.
    pub singular: bool,
}

/// Result of one DMD decomposition of a window.
#[derive(Clone, Debug)]
pub struct DmdFactors {
    /// Discrete-time eigenvalues, descending in magnitude.
    pub lambda: Vec<Complex64>,
    /// Eigenvectors of `A~`, one column per eigenvalue.
    pub w: CMat,
    /// `n x r` modes.
    pub phi: CMat,
    pub b: Vec<Complex64>,
    pub amplitudes_singular: bool,
    /// SVD of the first `w - 1` window columns.
    pub svd: SvdFactors,
    /// Stream index of the window's first column.
    pub time_base: u64,
}

/// Builds `A~` from the full-window Gram: `X^T X'` is the off-by-one block
/// `G[0..w-1, 1..w]`, so no snapshot is read.
pub fn build_atilde(gram: &GramState, f: &SvdFactors) -> Result<AtildeBlock> {
    if f.rank == 0 {
        return Err(Error::RankCollapse);
    }
    let m = f.m;
    if gram.filled() != m + 1 {
        return Err(Error::dims(
            format!("Gram of {} columns", m + 1),
            gram.filled(),
        ));
    }
    let xtxp = gram.block(0, 1, m, m);
    let vsi = f.v_sigma_inv();
    let t = gemm(&xtxp, Op::NoTrans, &vsi, Op::NoTrans)?;
    let atilde = gemm(&vsi, Op::Trans, &t, Op::NoTrans)?;
    Ok(AtildeBlock { atilde, vsi })
}

/// Orders eigenpairs by descending magnitude, then real part, then
/// imaginary part. Keys are rounded to 1e-12 so that values equal up to
/// roundoff order consistently.
pub fn sort_eigenpairs(values: &[Complex64], vectors: &CMat) -> (Vec<Complex64>, CMat) {
    let q = |x: f64| (x * 1e12).round();
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (values[a], values[b]);
        q(y.norm())
            .total_cmp(&q(x.norm()))
            .then(q(y.re).total_cmp(&q(x.re)))
            .then(q(y.im).total_cmp(&q(x.im)))
            .then(a.cmp(&b))
    });
    (idx.iter().map(|&i| values[i]).collect(), vectors.select_cols(&idx))
}

/// Modes `Phi = X' (V S^-1 W)`, one pass over the `n x (w - 1)` snapshots.
pub fn dmd_modes<T: Real, S: ColumnSource<T> + ?Sized>(
    xprime: &S,
    blk: &AtildeBlock,
    w: &CMat,
) -> Result<CMat> {
    if xprime.ncols() != blk.vsi.rows() {
        return Err(Error::dims(
            format!("{} shifted snapshots", blk.vsi.rows()),
            xprime.ncols(),
        ));
    }
    let coeffs = rc_gemm(&blk.vsi, w)?;
    let cols = xprime.columns();
    let re = combine(&cols, &coeffs.real_part());
    let im = combine(&cols, &coeffs.imag_part());
    let data = re
        .as_slice()
        .iter()
        .zip(im.as_slice())
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    CMat::from_col_major(re.rows(), re.cols(), data)
}

/// Solves `(W diag(lambda)) b = alpha_1` with `alpha_1 = sigma * V[0, :]`,
/// the projection of the first snapshot onto the left singular vectors.
///
/// Modes with `|lambda| < rank_tol` are left out of the solve and get a zero
/// amplitude.
pub fn amplitudes(
    f: &SvdFactors,
    lambda: &[Complex64],
    w: &CMat,
    rank_tol: f64,
) -> Result<Amplitudes> {
    let r = f.rank;
    if lambda.len() != r || w.rows() != r || w.cols() != r {
        return Err(Error::dims(
            format!("{r} eigenpairs"),
            format!("{} values, {} x {} vectors", lambda.len(), w.rows(), w.cols()),
        ));
    }
    let alpha: Vec<Complex64> = (0..r)
        .map(|k| Complex64::new(f.sigma[k] * f.v[(0, k)], 0.0))
        .collect();
    let live: Vec<usize> = (0..r).filter(|&k| lambda[k].norm() >= rank_tol).collect();
    let mut b = vec![Complex64::new(0.0, 0.0); r];
    if live.is_empty() {
        log::warn!("all {r} eigenvalues below {rank_tol:e}; amplitudes set to zero");
        return Ok(Amplitudes { b, singular: true });
    }
    let scaled: Vec<Complex64> = live.iter().map(|&k| lambda[k]).collect();
    let wl = w.select_cols(&live).scale_cols(&scaled);
    let sol = solve_ls(&wl, &alpha)?;
    for (&k, x) in live.iter().zip(sol.x) {
        b[k] = x;
    }
    let singular = live.len() < r || sol.rank_deficient;
    if singular {
        log::debug!(
            "amplitude system singular: {} of {r} modes excluded, rank {}",
            r - live.len(),
            sol.rank
        );
    }
    Ok(Amplitudes { b, singular })
}

/// DMD of a full window `Z = [x_0 .. x_{w-1}]` given its Gram.
pub fn dmd_from_gram<T: Real, S: ColumnSource<T> + ?Sized>(
    window: &S,
    gram: &GramState,
    rank_tol: f64,
    time_base: u64,
) -> Result<DmdFactors> {
    let w = window.ncols();
    if w < 2 || gram.filled() != w {
        return Err(Error::WindowNotFull {
            filled: gram.filled(),
            width: w,
        });
    }
    let m = w - 1;
    let svd = svd_from_gram(&gram.block(0, 0, m, m), rank_tol)?;
    let blk = build_atilde(gram, &svd)?;
    let e = eig(&blk.atilde)?;
    let (lambda, vectors) = sort_eigenpairs(&e.values, &e.vectors);
    let phi = dmd_modes(&ColumnRange::new(window, 1, m), &blk, &vectors)?;
    let amp = amplitudes(&svd, &lambda, &vectors, rank_tol)?;
    Ok(DmdFactors {
        lambda,
        w: vectors,
        phi,
        b: amp.b,
        amplitudes_singular: amp.singular,
        svd,
        time_base,
    })
}

/// DMD recomputed from the raw snapshots, Gram included.
pub fn dmd_batch<T: Real, S: ColumnSource<T> + ?Sized>(
    window: &S,
    rank_tol: f64,
    time_base: u64,
) -> Result<DmdFactors> {
    let gram = init_gram(window)?;
    dmd_from_gram(window, &gram, rank_tol, time_base)
}

impl DmdFactors {
    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    /// `Phi * diag(b * lambda^t)` summed over modes: the model's estimate of
    /// the snapshot `t` steps after the window start.
    pub fn predict(&self, t: u32) -> Result<Vec<Complex64>> {
        let c: Vec<Complex64> = self
            .b
            .iter()
            .zip(&self.lambda)
            .map(|(b, l)| b * l.powu(t))
            .collect();
        cmatvec(&self.phi, &c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::synthetic::{parse_spectrum, PlantedSystem};
    use crate::mos_svd::left_singular;
    use crate::smalldense::cgemm;
    use crate::window_gram::WindowBuffer;
    use nalgebra::{Complex, ComplexField, DMatrix};
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-6;

    fn planted(spectrum: &str, n: usize, w: usize) -> (PlantedSystem, Vec<Vec<f64>>) {
        let sys = PlantedSystem::new(&parse_spectrum(spectrum).unwrap(), n, 5).unwrap();
        let cols = (0..w as u32).map(|k| sys.snapshot(k)).collect();
        (sys, cols)
    }

    fn to_na(cols: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(cols[0].len(), cols.len(), |i, j| cols[j][i])
    }

    /// Pseudoinverse as `M^H (M M^H)^+`, with the Hermitian inverse taken
    /// from a symmetric eigendecomposition. The library's SVD-based
    /// pseudoinverse is unreliable on exactly rank-deficient input.
    fn pinv<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> DMatrix<T> {
        let e = (m * m.adjoint()).symmetric_eigen();
        let top = e.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let inv = e
            .eigenvalues
            .map(|l| T::from_real(if l > 1e-12 * top { 1.0 / l } else { 0.0 }));
        let g = &e.eigenvectors * DMatrix::from_diagonal(&inv) * e.eigenvectors.adjoint();
        m.adjoint() * g
    }

    /// Nonzero eigenvalues of `X' pinv(X)` computed in `n` dimensions.
    fn operator_eigenvalues(cols: &[Vec<f64>]) -> Vec<Complex64> {
        let z = to_na(cols);
        let m = cols.len() - 1;
        let x = z.columns(0, m).into_owned();
        let xp = z.columns(1, m).into_owned();
        let a = &xp * pinv(&x);
        let ev = a.complex_eigenvalues();
        let scale = ev.iter().map(|c| c.norm()).fold(0.0, f64::max);
        ev.iter()
            .filter(|c| c.norm() > 1e-7 * scale)
            .map(|c| Complex64::new(c.re, c.im))
            .collect()
    }

    fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
        assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
        let mut used = vec![false; b.len()];
        let mut worst: f64 = 0.0;
        for x in a {
            let (j, d) = b
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, y)| (j, (x - y).norm()))
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .unwrap();
            used[j] = true;
            worst = worst.max(d);
        }
        worst
    }

    fn cosine(a: &[Complex64], b: &[Complex64]) -> f64 {
        let ip: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
        let na = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        ip.norm() / (na * nb)
    }

    #[test]
    fn stationary_stream() {
        let x: Vec<f64> = (0..25).map(|i| 1.0 + (i as f64).cos()).collect();
        let cols = vec![x.clone(); 6];
        let d = dmd_batch(cols.as_slice(), TOL, 0).unwrap();
        assert_eq!(d.rank(), 1);
        assert!((d.lambda[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        assert!(cosine(d.phi.col(0), &xc) > 1.0 - 1e-12);
        let expect_b = d.svd.sigma[0] * d.svd.v[(0, 0)];
        assert!((d.b[0] * d.w[(0, 0)] - expect_b).norm() < 1e-10 * expect_b.abs());
        let fit = d.predict(0).unwrap();
        for (p, v) in fit.iter().zip(&x) {
            assert!((p - v).norm() < 1e-10);
        }
    }

    #[test]
    fn stationary_atilde_is_one() {
        let cols = vec![vec![2.0, -1.0, 0.5]; 4];
        let w = WindowBuffer::from_columns(cols.as_slice()).unwrap();
        let g = init_gram(&w).unwrap();
        let svd = svd_from_gram(&g.block(0, 0, 3, 3), TOL).unwrap();
        let blk = build_atilde(&g, &svd).unwrap();
        assert_eq!((blk.atilde.rows(), blk.atilde.cols()), (1, 1));
        assert!((blk.atilde[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planted_diagonal_system() {
        let (sys, cols) = planted("0.9,0.5", 10, 8);
        let d = dmd_batch(cols.as_slice(), TOL, 0).unwrap();
        assert_eq!(d.rank(), 2);
        assert!((d.lambda[0] - Complex64::new(0.9, 0.0)).norm() < 1e-10);
        assert!((d.lambda[1] - Complex64::new(0.5, 0.0)).norm() < 1e-10);
        let v = sys.eigenvectors();
        for k in 0..2 {
            assert!(cosine(d.phi.col(k), v.col(k)) > 1.0 - 1e-8);
        }
        let fit = d.predict(0).unwrap();
        let err: f64 = fit.iter().zip(&cols[0]).map(|(p, x)| (p - x).norm_sqr()).sum::<f64>();
        let norm: f64 = cols[0].iter().map(|x| x * x).sum();
        assert!((err / norm).sqrt() < 1e-8);
    }

    #[test]
    fn atilde_matches_explicit_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let cols: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..40).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let win = WindowBuffer::from_columns(cols.as_slice()).unwrap();
        let g = init_gram(&win).unwrap();
        let svd = svd_from_gram(&g.block(0, 0, 6, 6), TOL).unwrap();
        let blk = build_atilde(&g, &svd).unwrap();

        let u = left_singular(&ColumnRange::new(cols.as_slice(), 0, 6), &svd).unwrap();
        let xp = Mat::from_fn(40, 6, |i, j| cols[j + 1][i]);
        let utxp = gemm(&u, Op::Trans, &xp, Op::NoTrans).unwrap();
        let oracle = gemm(&utxp, Op::NoTrans, &blk.vsi, Op::NoTrans).unwrap();
        assert!(blk.atilde.max_abs_diff(&oracle) < 1e-10);
    }

    #[test]
    fn build_atilde_needs_no_inner_products() {
        let (_, cols) = planted("0.9,0.5", 10, 6);
        let win = WindowBuffer::from_columns(cols.as_slice()).unwrap();
        let g = init_gram(&win).unwrap();
        let before = g.inner_products();
        let svd = svd_from_gram(&g.block(0, 0, 5, 5), TOL).unwrap();
        build_atilde(&g, &svd).unwrap();
        assert_eq!(g.inner_products(), before);
    }

    #[test]
    fn modes_are_eigenvectors_of_the_full_operator() {
        let (_, cols) = planted("0.95,0.8:0.5,0.3", 20, 9);
        let d = dmd_batch(cols.as_slice(), TOL, 0).unwrap();
        let z = to_na(&cols);
        let x = z.columns(0, 8).into_owned();
        let xp = z.columns(1, 8).into_owned();
        let px = pinv(&x);
        let xc = xp.map(|v| Complex::new(v, 0.0));
        let pc = px.map(|v| Complex::new(v, 0.0));
        for k in 0..d.rank() {
            let phi = DMatrix::from_fn(20, 1, |i, _| {
                let z = d.phi[(i, k)];
                Complex::new(z.re, z.im)
            });
            let a_phi = &xc * (&pc * &phi);
            let l = Complex::new(d.lambda[k].re, d.lambda[k].im);
            let res = (&a_phi - &phi * l).norm() / phi.norm();
            assert!(res < 1e-6, "mode {k}: {res}");
        }
    }

    #[test]
    fn amplitudes_match_least_squares_oracle() {
        let (_, cols) = planted("0.9,0.7:0.4,0.5", 16, 10);
        let d = dmd_batch(cols.as_slice(), TOL, 0).unwrap();
        let phi = DMatrix::from_fn(16, d.rank(), |i, k| {
            let z = d.phi[(i, k)];
            Complex::new(z.re, z.im)
        });
        let x1 = DMatrix::from_fn(16, 1, |i, _| Complex::new(cols[0][i], 0.0));
        let oracle = pinv(&phi) * x1;
        let bnorm = d.b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for k in 0..d.rank() {
            let o = Complex64::new(oracle[k].re, oracle[k].im);
            assert!((d.b[k] - o).norm() / bnorm < 1e-8);
        }
        assert!(!d.amplitudes_singular);
    }

    #[test]
    fn zero_eigenvalue_gets_zero_amplitude() {
        // a nilpotent component: x_k has a piece that vanishes after one step
        let (sys, _) = planted("0.9,0.6", 8, 1);
        let mut cols: Vec<Vec<f64>> = (0..5).map(|k| sys.snapshot(k)).collect();
        let extra: Vec<f64> = (0..8).map(|i| if i == 3 { 1.0 } else { 0.0 }).collect();
        cols[0].iter_mut().zip(&extra).for_each(|(a, b)| *a += b);
        let d = dmd_batch(cols.as_slice(), TOL, 0).unwrap();
        let k0 = d
            .lambda
            .iter()
            .position(|l| l.norm() < TOL)
            .expect("a zero eigenvalue");
        assert_eq!(d.b[k0], Complex64::new(0.0, 0.0));
        assert!(d.amplitudes_singular);
    }

    #[test]
    fn eigenpair_order() {
        let vals = vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, -0.9),
            Complex64::new(0.0, 0.9),
            Complex64::new(-0.9, 0.0),
            Complex64::new(0.9, 0.0),
        ];
        let (sorted, _) = sort_eigenpairs(&vals, &CMat::identity(5));
        let want = [
            Complex64::new(0.9, 0.0),
            Complex64::new(0.0, 0.9),
            Complex64::new(0.0, -0.9),
            Complex64::new(-0.9, 0.0),
            Complex64::new(0.5, 0.0),
        ];
        assert_eq!(sorted, want);
    }

    #[test]
    fn eigenvectors_satisfy_atilde() {
        let (_, cols) = planted("0.9,1:0.2", 12, 7);
        let win = WindowBuffer::from_columns(cols.as_slice()).unwrap();
        let g = init_gram(&win).unwrap();
        let d = dmd_from_gram(&win, &g, TOL, 0).unwrap();
        let blk = build_atilde(&g, &d.svd).unwrap();
        let aw = cgemm(&blk.atilde.to_complex(), Op::NoTrans, &d.w, Op::NoTrans).unwrap();
        for k in 0..d.rank() {
            for i in 0..d.rank() {
                assert!((aw[(i, k)] - d.lambda[k] * d.w[(i, k)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn planted_spectra_recovered() {
        for spectrum in ["0.9,0.5", "1:0.39269908169872414", "1.0,0.7:0.3"] {
            let (sys, cols) = planted(spectrum, 64, 12);
            let d = dmd_batch(cols.as_slice(), TOL, 0).unwrap();
            assert!(multiset_distance(&d.lambda, &sys.eigenvalues()) < 1e-8, "{spectrum}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn same_eigenvalues_as_full_operator(n in 12usize..30, w in 4usize..10, rank in 1usize..4, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let basis: Vec<Vec<f64>> = (0..rank)
                .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let cols: Vec<Vec<f64>> = (0..w)
                .map(|_| {
                    let c: Vec<f64> = (0..rank).map(|_| rng.random_range(-1.0..1.0)).collect();
                    (0..n).map(|i| (0..rank).map(|k| c[k] * basis[k][i]).sum()).collect()
                })
                .collect();
            let d = dmd_batch(cols.as_slice(), TOL, 0).unwrap();
            let oracle = operator_eigenvalues(&cols);
            let scale = oracle.iter().map(|c| c.norm()).fold(1.0, f64::max);
            let nonzero: Vec<Complex64> = d
                .lambda
                .iter()
                .cloned()
                .filter(|c| c.norm() > 1e-7 * scale)
                .collect();
            prop_assert!(multiset_distance(&nonzero, &oracle) < 1e-8 * scale, "{:?} vs {:?}", nonzero, oracle);
        }
    }
}
