//! Orthonormal cosine-transform ingestion.
//!
//! Singular values and DMD eigenvalues are unchanged when every snapshot is
//! mapped through the same orthonormal transform, and the modes transform
//! with it. Snapshots can therefore be decomposed in a compressed basis.

use std::sync::Arc;

use num_complex::Complex64;
use rustdct::{DctPlanner, TransformType2And3};

use crate::dmd::DmdFactors;
use crate::error::{Error, Result};
use crate::smalldense::CMat;

/// Orthonormal type-II DCT over a 1-D signal or a column-major 2-D frame.
#[derive(Clone)]
pub struct Dct {
    /// `(width, height)`; a 1-D transform has width 1.
    shape: (usize, usize),
    along_y: Arc<dyn TransformType2And3<f64>>,
    along_x: Arc<dyn TransformType2And3<f64>>,
}

impl std::fmt::Debug for Dct {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dct").field("shape", &self.shape).finish()
    }
}

impl Dct {
    pub fn new_1d(n: usize) -> Result<Self> {
        Self::new_2d(1, n)
    }

    /// Separable transform of a `width x height` frame flattened with index
    /// `x * height + y`.
    pub fn new_2d(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::BadParams(format!("transform shape {width}x{height}")));
        }
        let mut planner = DctPlanner::new();
        Ok(Self {
            shape: (width, height),
            along_y: planner.plan_dct2(height),
            along_x: planner.plan_dct2(width),
        })
    }

    pub fn len(&self) -> usize {
        self.shape.0 * self.shape.1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::dims(self.len(), v.len()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut v = x.to_vec();
        self.apply(&mut v, true);
        Ok(v)
    }

    pub fn inverse(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.check(c)?;
        let mut v = c.to_vec();
        self.apply(&mut v, false);
        Ok(v)
    }

    /// Applies the transform to the real and imaginary parts separately.
    pub fn forward_complex(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        let re = self.forward(&z.iter().map(|c| c.re).collect::<Vec<_>>())?;
        let im = self.forward(&z.iter().map(|c| c.im).collect::<Vec<_>>())?;
        Ok(re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect())
    }

    pub fn inverse_complex(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        let re = self.inverse(&z.iter().map(|c| c.re).collect::<Vec<_>>())?;
        let im = self.inverse(&z.iter().map(|c| c.im).collect::<Vec<_>>())?;
        Ok(re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect())
    }

    fn apply(&self, v: &mut [f64], forward: bool) {
        let (w, h) = self.shape;
        for col in v.chunks_exact_mut(h) {
            run(self.along_y.as_ref(), col, forward);
        }
        if w > 1 {
            let mut line = vec![0.0; w];
            for y in 0..h {
                for x in 0..w {
                    line[x] = v[x * h + y];
                }
                run(self.along_x.as_ref(), &mut line, forward);
                for x in 0..w {
                    v[x * h + y] = line[x];
                }
            }
        }
    }
}

/// Orthonormal DCT-II (forward) or its inverse, the scaled DCT-III.
fn run(plan: &dyn TransformType2And3<f64>, buf: &mut [f64], forward: bool) {
    let n = buf.len() as f64;
    let (s0, sk) = ((1.0 / n).sqrt(), (2.0 / n).sqrt());
    if forward {
        plan.process_dct2(buf);
        buf[0] *= s0;
        buf[1..].iter_mut().for_each(|c| *c *= sk);
    } else {
        buf[0] *= 2.0 * s0;
        buf[1..].iter_mut().for_each(|c| *c *= sk);
        plan.process_dct3(buf);
    }
}

/// Transform coefficients, either all of them or a retained subset.
#[derive(Clone, Debug, PartialEq)]
pub enum Coeffs {
    Dense(Vec<f64>),
    /// Sorted indices and their values.
    Sparse {
        indices: Vec<usize>,
        values: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformedColumn {
    pub coeffs: Coeffs,
    pub n: usize,
    pub keep_fraction: f64,
    /// Fraction of the coefficient energy retained.
    pub energy_ratio: f64,
}

impl TransformedColumn {
    pub fn to_dense(&self) -> Vec<f64> {
        match &self.coeffs {
            Coeffs::Dense(v) => v.clone(),
            Coeffs::Sparse { indices, values } => {
                let mut v = vec![0.0; self.n];
                for (&i, &x) in indices.iter().zip(values) {
                    v[i] = x;
                }
                v
            }
        }
    }
}

pub fn transform(dct: &Dct, col: &[f64]) -> Result<TransformedColumn> {
    Ok(TransformedColumn {
        coeffs: Coeffs::Dense(dct.forward(col)?),
        n: col.len(),
        keep_fraction: 1.0,
        energy_ratio: 1.0,
    })
}

pub fn inverse_transform(dct: &Dct, tc: &TransformedColumn) -> Result<Vec<f64>> {
    dct.inverse(&tc.to_dense())
}

/// Keeps the `ceil(keep_fraction * n)` largest-magnitude coefficients,
/// preferring lower indices on ties.
pub fn sparsify(tc: &TransformedColumn, keep_fraction: f64) -> Result<TransformedColumn> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::BadParams(format!(
            "keep fraction {keep_fraction} outside (0, 1]"
        )));
    }
    let dense = tc.to_dense();
    let n = dense.len();
    let k = ((keep_fraction * n as f64).ceil() as usize).clamp(1, n.max(1));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dense[b].abs().total_cmp(&dense[a].abs()).then(a.cmp(&b)));
    let mut indices = order[..k.min(n)].to_vec();
    indices.sort_unstable();
    let values: Vec<f64> = indices.iter().map(|&i| dense[i]).collect();
    let total: f64 = dense.iter().map(|x| x * x).sum();
    let kept: f64 = values.iter().map(|x| x * x).sum();
    Ok(TransformedColumn {
        coeffs: Coeffs::Sparse { indices, values },
        n,
        keep_fraction,
        energy_ratio: if total > 0.0 { kept / total } else { 1.0 },
    })
}

/// Greedy nearest matching of two eigenvalue lists; the largest matched
/// distance, or infinity if the lengths differ.
pub fn eigenvalue_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let best = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1));
        if let Some((j, d)) = best {
            used[j] = true;
            worst = worst.max(d);
        }
    }
    worst
}

/// Relative distance between two vectors after removing the best phase.
pub fn phase_aligned_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    let ip: Complex64 = a.iter().zip(b).map(|(x, y)| y.conj() * x).sum();
    let phase = if ip.norm() > 0.0 {
        ip / ip.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y * phase).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Discrepancies between a decomposition of raw data and one of the same
/// data in the transformed basis.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InvarianceReport {
    /// Largest `|sigma_raw - sigma_transformed| / sigma_raw[0]`.
    pub sigma_error: f64,
    /// Largest matched eigenvalue distance.
    pub lambda_error: f64,
    /// Largest phase-aligned relative error between transformed modes and
    /// the transform of the raw modes.
    pub mode_error: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct InvarianceTolerances {
    pub sigma: f64,
    pub lambda: f64,
    pub mode: f64,
}

impl Default for InvarianceTolerances {
    fn default() -> Self {
        Self {
            sigma: 1e-10,
            lambda: 1e-9,
            mode: 1e-6,
        }
    }
}

impl InvarianceReport {
    /// Elementwise maximum of two reports.
    pub fn merge(&self, other: &Self) -> Self {
        Self {
            sigma_error: self.sigma_error.max(other.sigma_error),
            lambda_error: self.lambda_error.max(other.lambda_error),
            mode_error: self.mode_error.max(other.mode_error),
        }
    }

    pub fn check(&self, tol: &InvarianceTolerances) -> Result<()> {
        for (quantity, error, tolerance) in [
            ("sigma", self.sigma_error, tol.sigma),
            ("lambda", self.lambda_error, tol.lambda),
            ("modes", self.mode_error, tol.mode),
        ] {
            if !(error <= tolerance) {
                return Err(Error::InvarianceViolation {
                    quantity: quantity.into(),
                    error,
                    tolerance,
                });
            }
        }
        Ok(())
    }
}

/// Compares DMDs of the same window taken in the raw and transformed bases.
pub fn compare(raw: &DmdFactors, transformed: &DmdFactors, dct: &Dct) -> Result<InvarianceReport> {
    let (sr, st) = (&raw.svd.sigma, &transformed.svd.sigma);
    let sigma_error = if sr.len() == st.len() {
        sr.iter()
            .zip(st)
            .map(|(a, b)| (a - b).abs() / sr[0])
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let lambda_error = eigenvalue_distance(&raw.lambda, &transformed.lambda);
    let mut mode_error: f64 = 0.0;
    if lambda_error.is_finite() {
        let mut used = vec![false; transformed.rank()];
        for (k, l) in raw.lambda.iter().enumerate() {
            let j = (0..transformed.rank())
                .filter(|&j| !used[j])
                .min_by(|&a, &b| {
                    (transformed.lambda[a] - l)
                        .norm()
                        .total_cmp(&(transformed.lambda[b] - l).norm())
                })
                .unwrap_or(0);
            used[j] = true;
            let mapped = dct.forward_complex(raw.phi.col(k))?;
            mode_error = mode_error.max(phase_aligned_error(transformed.phi.col(j), &mapped));
        }
    } else {
        mode_error = f64::INFINITY;
    }
    Ok(InvarianceReport {
        sigma_error,
        lambda_error,
        mode_error,
    })
}

/// Streams `raw` through two engines, one fed the transformed columns (kept
/// sparse when `keep < 1`), and reports the worst discrepancy over all
/// steps after warm-up.
pub fn verify_invariance(
    raw: &[Vec<f64>],
    dct: &Dct,
    width: usize,
    rank_tol: f64,
    keep: f64,
) -> Result<InvarianceReport> {
    use crate::dmd::StreamingDmd;
    let n = dct.len();
    let mut a = StreamingDmd::<f64>::new(n, width, rank_tol)?;
    let mut b = StreamingDmd::<f64>::new(n, width, rank_tol)?;
    let mut report = InvarianceReport::default();
    for (k, col) in raw.iter().enumerate() {
        let tc = transform(dct, col)?;
        let tc = if keep < 1.0 { sparsify(&tc, keep)? } else { tc };
        let warm = a.is_warm();
        let (da, db) = match (&tc.coeffs, warm) {
            (Coeffs::Dense(v), true) => (a.dmd_step(col)?, b.dmd_step(v)?),
            (Coeffs::Sparse { indices, values }, true) => {
                (a.dmd_step(col)?, b.dmd_step_sparse(indices, values)?)
            }
            (Coeffs::Dense(v), false) => {
                a.push(col)?;
                b.push(v)?;
                if k + 1 < width {
                    continue;
                }
                (a.dmd()?, b.dmd()?)
            }
            (Coeffs::Sparse { indices, values }, false) => {
                a.push(col)?;
                b.push_sparse(indices, values)?;
                if k + 1 < width {
                    continue;
                }
                (a.dmd()?, b.dmd()?)
            }
        };
        report = report.merge(&compare(&da, &db, dct)?);
    }
    Ok(report)
}

/// Modes mapped back to the raw basis.
pub fn modes_to_raw(dct: &Dct, phi: &CMat) -> Result<CMat> {
    let mut out = CMat::zeros(phi.rows(), phi.cols());
    for k in 0..phi.cols() {
        let v = dct.inverse_complex(phi.col(k))?;
        out.col_mut(k).copy_from_slice(&v);
    }
    Ok(out)
}
