//! Low-rank/sparse separation of video streams.
//!
//! The mode whose eigenvalue is closest to stationary (`|log lambda|`
//! smallest) models the background. Its reconstruction is subtracted from
//! each frame, and the residual is thresholded into a foreground mask.

use num_complex::Complex64;

use crate::dmd::{DmdFactors, StreamingDmd};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::smalldense::CMat;
use crate::unitary::Dct;
use crate::window_gram::ColumnSource;

/// Eigenvalues at or below this magnitude are treated as zero.
const ZERO_EIGENVALUE: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparationOptions {
    /// Strict threshold on the residual.
    pub threshold: f64,
    /// Threshold `|sparse|` rather than the signed residual.
    pub mask_abs: bool,
}

impl Default for SeparationOptions {
    fn default() -> Self {
        Self {
            threshold: 0.2,
            mask_abs: false,
        }
    }
}

/// Per-frame columns of a separation.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparationResult {
    /// `|L|`, the magnitude of the background reconstruction.
    pub lowrank: Vec<Vec<f64>>,
    /// `input - |L|`.
    pub sparse: Vec<Vec<f64>>,
    pub mask: Vec<Vec<bool>>,
    /// Stream index of the first returned column.
    pub frame_index: u64,
}

/// Index of the eigenvalue minimizing `|log lambda|`; ties go to the smaller
/// `|arg lambda|`, then the lower index.
pub fn background_index(lambda: &[Complex64]) -> Result<usize> {
    let mut best: Option<(f64, f64, usize)> = None;
    for (i, l) in lambda.iter().enumerate() {
        if !(l.norm() > ZERO_EIGENVALUE) {
            continue;
        }
        let lg = l.ln();
        let key = (lg.norm(), lg.im.abs(), i);
        let better = match best {
            None => true,
            Some((a, b, _)) => key.0 < a || (key.0 == a && key.1 < b),
        };
        if better {
            best = Some(key);
        }
    }
    best.map(|b| b.2).ok_or(Error::NoViableMode)
}

/// Columns `b[idx] * phi[:, idx] * lambda[idx]^e` for each exponent `e`.
pub fn reconstruct_lowrank(d: &DmdFactors, idx: usize, exponents: &[u32]) -> Result<CMat> {
    if idx >= d.rank() {
        return Err(Error::dims(format!("mode index < {}", d.rank()), idx));
    }
    let phi = d.phi.col(idx);
    let mut out = CMat::zeros(phi.len(), exponents.len());
    for (j, &e) in exponents.iter().enumerate() {
        let c = d.b[idx] * d.lambda[idx].powu(e);
        out.col_mut(j)
            .iter_mut()
            .zip(phi)
            .for_each(|(o, p)| *o = c * p);
    }
    Ok(out)
}

/// Splits `input` against the complex background column `lowrank`, which is
/// first mapped back to pixels when the engine ran in a transformed basis.
pub fn split_column<T: Real>(
    input: &[T],
    lowrank: &[Complex64],
    pixels: Option<&Dct>,
    opts: &SeparationOptions,
) -> Result<(Vec<f64>, Vec<f64>, Vec<bool>)> {
    if input.len() != lowrank.len() {
        return Err(Error::dims(lowrank.len(), input.len()));
    }
    let mapped;
    let lowrank = match pixels {
        Some(dct) => {
            mapped = dct.inverse_complex(lowrank)?;
            &mapped
        }
        None => lowrank,
    };
    let l: Vec<f64> = lowrank.iter().map(|z| z.norm()).collect();
    let s: Vec<f64> = input.iter().zip(&l).map(|(x, l)| x.to_f64() - l).collect();
    let m = s
        .iter()
        .map(|&v| {
            let v = if opts.mask_abs { v.abs() } else { v };
            v > opts.threshold
        })
        .collect();
    Ok((l, s, m))
}

/// Separates every column of the first full window, using exponents
/// `0..w` relative to the window start.
///
/// `frames` are the pixel-domain columns of the window; `pixels` maps the
/// decomposition's basis back to pixels when it differs.
pub fn separate_window<T: Real, S: ColumnSource<T> + ?Sized>(
    frames: &S,
    d: &DmdFactors,
    pixels: Option<&Dct>,
    opts: &SeparationOptions,
) -> Result<SeparationResult> {
    let w = frames.ncols();
    let idx = background_index(&d.lambda)?;
    let exps: Vec<u32> = (0..w as u32).collect();
    let l = reconstruct_lowrank(d, idx, &exps)?;
    let mut out = SeparationResult {
        lowrank: Vec::with_capacity(w),
        sparse: Vec::with_capacity(w),
        mask: Vec::with_capacity(w),
        frame_index: d.time_base,
    };
    for j in 0..w {
        let (lj, sj, mj) = split_column(frames.column(j), l.col(j), pixels, opts)?;
        out.lowrank.push(lj);
        out.sparse.push(sj);
        out.mask.push(mj);
    }
    Ok(out)
}

/// [`separate_window`] on a raw-basis window.
pub fn separate_first<T: Real, S: ColumnSource<T> + ?Sized>(
    window: &S,
    d: &DmdFactors,
    opts: &SeparationOptions,
) -> Result<SeparationResult> {
    separate_window(window, d, None, opts)
}

/// Separates the newest column of a window decomposed as `d`, at exponent
/// `w - 1`.
pub fn separate_newest<T: Real>(
    frame: &[T],
    d: &DmdFactors,
    width: usize,
    pixels: Option<&Dct>,
    opts: &SeparationOptions,
) -> Result<SeparationResult> {
    let idx = background_index(&d.lambda)?;
    let l = reconstruct_lowrank(d, idx, &[width as u32 - 1])?;
    let (lj, sj, mj) = split_column(frame, l.col(0), pixels, opts)?;
    Ok(SeparationResult {
        lowrank: vec![lj],
        sparse: vec![sj],
        mask: vec![mj],
        frame_index: d.time_base + width as u64 - 1,
    })
}

/// One streaming step: slides `col` into the engine and separates it.
pub fn separate_step<T: Real>(
    engine: &mut StreamingDmd<T>,
    col: &[T],
    opts: &SeparationOptions,
) -> Result<SeparationResult> {
    let d = engine.dmd_step(col)?;
    separate_newest(col, &d, engine.window().width(), None, opts)
}

/// Detection scores of a mask against ground truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalMetrics {
    pub recall: f64,
    pub precision: f64,
    pub f_measure: f64,
    /// PSNR of the binary mask against the ground truth at peak 1, in dB;
    /// infinite for a perfect mask.
    pub psnr: f64,
    /// No pixel was detected, so precision is undefined and reported as 0.
    pub precision_undefined: bool,
}

pub fn evaluate(mask: &[bool], truth: &[bool]) -> Result<EvalMetrics> {
    if mask.len() != truth.len() {
        return Err(Error::dims(truth.len(), mask.len()));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&m, &t) in mask.iter().zip(truth) {
        match (m, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    if tp + fneg == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    let recall = tp as f64 / (tp + fneg) as f64;
    let precision_undefined = tp + fp == 0;
    let precision = if precision_undefined {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let f_measure = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let mse = (fp + fneg) as f64 / mask.len() as f64;
    let psnr = if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    };
    Ok(EvalMetrics {
        recall,
        precision,
        f_measure,
        psnr,
        precision_undefined,
    })
}
