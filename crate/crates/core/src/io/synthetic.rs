//! Deterministic synthetic snapshot streams.

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::smalldense::{CMat, Mat};

/// One entry of a planted spectrum: a real eigenvalue, or the conjugate pair
/// `r e^{+-i theta}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PlantedEigen {
    Real(f64),
    Pair { r: f64, theta: f64 },
}

impl PlantedEigen {
    fn dim(&self) -> usize {
        match self {
            PlantedEigen::Real(_) => 1,
            PlantedEigen::Pair { .. } => 2,
        }
    }
}

/// Parses a comma-separated spectrum such as `0.9,0.5` or `1.0,0.7:0.3`;
/// `r:theta` denotes a conjugate pair.
pub fn parse_spectrum(s: &str) -> Result<Vec<PlantedEigen>> {
    let bad = |t: &str| Error::BadParams(format!("spectrum entry '{t}'"));
    let mut out = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let e = match tok.split_once(':') {
            Some((r, th)) => PlantedEigen::Pair {
                r: r.trim().parse().map_err(|_| bad(tok))?,
                theta: th.trim().parse().map_err(|_| bad(tok))?,
            },
            None => PlantedEigen::Real(tok.parse().map_err(|_| bad(tok))?),
        };
        out.push(e);
    }
    if out.is_empty() {
        return Err(Error::BadParams("empty spectrum".into()));
    }
    Ok(out)
}

/// Linear system `x_{k+1} = A x_k` with a prescribed spectrum, embedded in
/// `n` dimensions by a fixed orthonormal basis. Snapshots are evaluated in
/// closed form, so the stream is exactly linear up to one rounding per entry.
#[derive(Clone, Debug)]
pub struct PlantedSystem {
    spectrum: Vec<PlantedEigen>,
    embedding: Mat,
    y0: Vec<f64>,
}

impl PlantedSystem {
    pub fn new(spectrum: &[PlantedEigen], n: usize, seed: u64) -> Result<Self> {
        let d: usize = spectrum.iter().map(PlantedEigen::dim).sum();
        if d == 0 || d > n {
            return Err(Error::BadParams(format!(
                "spectrum of dimension {d} does not fit in n = {n}"
            )));
        }
        for e in spectrum {
            let ok = match *e {
                PlantedEigen::Real(l) => l.is_finite(),
                PlantedEigen::Pair { r, theta } => {
                    r.is_finite() && theta.is_finite() && r != 0.0 && theta.sin() != 0.0
                }
            };
            if !ok {
                return Err(Error::BadParams(format!("invalid eigenvalue {e:?}")));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let embedding = orthonormal_columns(n, d, &mut rng);
        let y0 = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
        Ok(Self {
            spectrum: spectrum.to_vec(),
            embedding,
            y0,
        })
    }

    pub fn n(&self) -> usize {
        self.embedding.rows()
    }

    /// `x_k = Q B^k y_0`.
    pub fn snapshot(&self, k: u32) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.y0.len());
        let mut j = 0;
        for e in &self.spectrum {
            match *e {
                PlantedEigen::Real(l) => {
                    y.push(l.powi(k as i32) * self.y0[j]);
                    j += 1;
                }
                PlantedEigen::Pair { r, theta } => {
                    let rk = r.powi(k as i32);
                    let (s, c) = (k as f64 * theta).sin_cos();
                    let (a, b) = (self.y0[j], self.y0[j + 1]);
                    y.push(rk * (c * a - s * b));
                    y.push(rk * (s * a + c * b));
                    j += 2;
                }
            }
        }
        (0..self.n())
            .map(|i| y.iter().enumerate().map(|(k, yk)| self.embedding[(i, k)] * yk).sum())
            .collect()
    }

    /// Eigenvalues of the planted operator, pairs listed as `+theta` first.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let mut out = Vec::new();
        for e in &self.spectrum {
            match *e {
                PlantedEigen::Real(l) => out.push(Complex64::new(l, 0.0)),
                PlantedEigen::Pair { r, theta } => {
                    let z = Complex64::from_polar(r, theta);
                    out.push(z);
                    out.push(z.conj());
                }
            }
        }
        out
    }

    /// Unit eigenvectors in `n` dimensions, matching [`eigenvalues`](Self::eigenvalues).
    pub fn eigenvectors(&self) -> CMat {
        let n = self.n();
        let d = self.y0.len();
        let q = |i: usize, k: usize| Complex64::new(self.embedding[(i, k)], 0.0);
        let mut v = CMat::zeros(n, d);
        let mut j = 0;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for e in &self.spectrum {
            match e {
                PlantedEigen::Real(_) => {
                    for i in 0..n {
                        v[(i, j)] = q(i, j);
                    }
                    j += 1;
                }
                // the rotation block has eigenvectors (1, -+i)/sqrt 2
                PlantedEigen::Pair { .. } => {
                    for i in 0..n {
                        let a = q(i, j) * h;
                        let b = q(i, j + 1) * Complex64::new(0.0, h);
                        v[(i, j)] = a - b;
                        v[(i, j + 1)] = a + b;
                    }
                    j += 2;
                }
            }
        }
        v
    }
}

/// `n x d` matrix with orthonormal columns from Gram-Schmidt on Gaussian
/// vectors.
pub fn orthonormal_columns(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Mat {
    let mut q = Mat::zeros(n, d);
    let mut k = 0;
    while k < d {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        // two passes keep the basis orthonormal to working precision
        for _ in 0..2 {
            for j in 0..k {
                let c: f64 = q.col(j).iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q.col(j)).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        q.col_mut(k)
            .iter_mut()
            .zip(&v)
            .for_each(|(x, y)| *x = y / norm);
        k += 1;
    }
    q
}

/// A static textured background with an 8x8 square of value 1 bouncing
/// around the frame. Frames are flattened column-major (`x * height + y`).
#[derive(Clone, Debug)]
pub struct MovingBlob {
    width: usize,
    height: usize,
    background: Vec<f64>,
}

pub const BLOB_SIZE: usize = 8;
const BLOB_VELOCITY: (i64, i64) = (2, 1);

impl MovingBlob {
    pub fn new(width: usize, height: usize, seed: u64) -> Result<Self> {
        if width <= BLOB_SIZE || height <= BLOB_SIZE {
            return Err(Error::BadParams(format!(
                "frame {width}x{height} too small for an {BLOB_SIZE}x{BLOB_SIZE} blob"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let background = (0..width * height)
            .map(|_| rng.random_range(0.2..0.5))
            .collect();
        Ok(Self {
            width,
            height,
            background,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Top-left corner of the blob in frame `k`.
    pub fn position(&self, k: usize) -> (usize, usize) {
        let bounce = |v: i64, span: usize| {
            let span = span as i64;
            let p = (v * k as i64).rem_euclid(2 * span);
            (if p <= span { p } else { 2 * span - p }) as usize
        };
        (
            bounce(BLOB_VELOCITY.0, self.width - BLOB_SIZE),
            bounce(BLOB_VELOCITY.1, self.height - BLOB_SIZE),
        )
    }

    /// Frame `k` and its foreground mask.
    pub fn frame(&self, k: usize) -> (Vec<f64>, Vec<bool>) {
        let mut f = self.background.clone();
        let mut mask = vec![false; f.len()];
        let (x0, y0) = self.position(k);
        for x in x0..x0 + BLOB_SIZE {
            for y in y0..y0 + BLOB_SIZE {
                f[x * self.height + y] = 1.0;
                mask[x * self.height + y] = true;
            }
        }
        (f, mask)
    }
}
