//! General real eigendecomposition: orthogonal Hessenberg reduction and the
//! shifted double-step QR iteration with eigenvector back-substitution
//! (EISPACK orthes/hqr2 lineage).

use num_complex::Complex64;

use super::mat::normalize_phase;
use super::{CMat, Mat};
use crate::error::{Error, Result};

/// Eigenpairs of a general real matrix.
///
/// Complex eigenvalues come in conjugate pairs, each with its own column.
/// Every eigenvector has unit 2-norm and its largest-magnitude entry is real
/// and positive.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    pub vectors: CMat,
}

const SWEEPS_PER_DIM: usize = 100;

/// Eigendecomposition of a square real matrix. Eigenpairs are returned in
/// the order the QR iteration deflates them; callers sort as needed.
pub fn eig(a: &Mat) -> Result<Eigen> {
    if !a.is_square() {
        return Err(Error::dims(
            format!("square matrix, {} x {}", a.rows(), a.rows()),
            format!("{} x {}", a.rows(), a.cols()),
        ));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Eigen {
            values: Vec::new(),
            vectors: CMat::zeros(0, 0),
        });
    }

    let mut h = a.clone();
    let mut v = Mat::zeros(n, n);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    orthes(&mut h, &mut v);
    hqr2(&mut h, &mut v, &mut d, &mut e, SWEEPS_PER_DIM * n)?;

    let mut vectors = CMat::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    let mut j = 0;
    while j < n {
        if e[j] == 0.0 {
            values.push(Complex64::new(d[j], 0.0));
            for i in 0..n {
                vectors[(i, j)] = Complex64::new(v[(i, j)], 0.0);
            }
            j += 1;
        } else {
            // Columns j and j+1 hold the real and imaginary parts belonging
            // to d[j] + i e[j]; the partner is the conjugate.
            values.push(Complex64::new(d[j], e[j]));
            values.push(Complex64::new(d[j + 1], e[j + 1]));
            for i in 0..n {
                let z = Complex64::new(v[(i, j)], v[(i, j + 1)]);
                vectors[(i, j)] = z;
                vectors[(i, j + 1)] = z.conj();
            }
            j += 2;
        }
    }
    for j in 0..n {
        let col = vectors.col_mut(j);
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            col.iter_mut().for_each(|z| *z /= norm);
        }
        normalize_phase(col);
    }
    Ok(Eigen { values, vectors })
}

fn orthes(h: &mut Mat, v: &mut Mat) {
    let n = h.rows();
    let high = n - 1;
    let mut ort = vec![0.0; n];

    for m in 1..high {
        let mut scale = 0.0;
        for i in m..=high {
            scale += h[(i, m - 1)].abs();
        }
        if scale != 0.0 {
            let mut hh = 0.0;
            for i in (m..=high).rev() {
                ort[i] = h[(i, m - 1)] / scale;
                hh += ort[i] * ort[i];
            }
            let mut g = hh.sqrt();
            if ort[m] > 0.0 {
                g = -g;
            }
            hh -= ort[m] * g;
            ort[m] -= g;

            for j in m..n {
                let mut f = 0.0;
                for i in (m..=high).rev() {
                    f += ort[i] * h[(i, j)];
                }
                f /= hh;
                for i in m..=high {
                    h[(i, j)] -= f * ort[i];
                }
            }
            for i in 0..=high {
                let mut f = 0.0;
                for j in (m..=high).rev() {
                    f += ort[j] * h[(i, j)];
                }
                f /= hh;
                for j in m..=high {
                    h[(i, j)] -= f * ort[j];
                }
            }
            ort[m] *= scale;
            h[(m, m - 1)] = scale * g;
        }
    }

    for i in 0..n {
        for j in 0..n {
            v[(i, j)] = if i == j { 1.0 } else { 0.0 };
        }
    }
    for m in (1..high).rev() {
        if h[(m, m - 1)] != 0.0 {
            for i in (m + 1)..=high {
                ort[i] = h[(i, m - 1)];
            }
            for j in m..=high {
                let mut g = 0.0;
                for i in m..=high {
                    g += ort[i] * v[(i, j)];
                }
                // double division avoids possible underflow
                g = (g / ort[m]) / h[(m, m - 1)];
                for i in m..=high {
                    v[(i, j)] += g * ort[i];
                }
            }
        }
    }
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

#[allow(clippy::many_single_char_names, unused_assignments)]
fn hqr2(
    h: &mut Mat,
    v: &mut Mat,
    d: &mut [f64],
    e: &mut [f64],
    budget: usize,
) -> Result<()> {
    let nn = d.len();
    let high = nn - 1;
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut t, mut w, mut x, mut y);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    let mut n = high as isize;
    let mut iter = 0;
    let mut total = 0;
    while n >= 0 {
        let nu = n as usize;
        // Look for a single small sub-diagonal element.
        let mut l = nu;
        while l > 0 {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            // One root found.
            h[(nu, nu)] += exshift;
            d[nu] = h[(nu, nu)];
            e[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            // Two roots found.
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[(nu, nu)] += exshift;
            h[(nu - 1, nu - 1)] += exshift;
            x = h[(nu, nu)];

            if q >= 0.0 {
                // Real pair.
                z = if p >= 0.0 { p + z } else { p - z };
                d[nu - 1] = x + z;
                d[nu] = d[nu - 1];
                if z != 0.0 {
                    d[nu] = x - w / z;
                }
                e[nu - 1] = 0.0;
                e[nu] = 0.0;
                x = h[(nu, nu - 1)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;

                for j in (nu - 1)..nn {
                    z = h[(nu - 1, j)];
                    h[(nu - 1, j)] = q * z + p * h[(nu, j)];
                    h[(nu, j)] = q * h[(nu, j)] - p * z;
                }
                for i in 0..=nu {
                    z = h[(i, nu - 1)];
                    h[(i, nu - 1)] = q * z + p * h[(i, nu)];
                    h[(i, nu)] = q * h[(i, nu)] - p * z;
                }
                for i in 0..=high {
                    z = v[(i, nu - 1)];
                    v[(i, nu - 1)] = q * z + p * v[(i, nu)];
                    v[(i, nu)] = q * v[(i, nu)] - p * z;
                }
            } else {
                // Complex pair.
                d[nu - 1] = x + p;
                d[nu] = x + p;
                e[nu - 1] = z;
                e[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            total += 1;
            if total > budget {
                return Err(Error::NoConvergence { iterations: budget });
            }

            // Form shift.
            x = h[(nu, nu)];
            y = 0.0;
            w = 0.0;
            if l < nu {
                y = h[(nu - 1, nu - 1)];
                w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            }

            // Wilkinson's original ad hoc shift.
            if iter == 10 {
                exshift += x;
                for i in 0..=nu {
                    h[(i, i)] -= x;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }

            // MATLAB's ad hoc shift.
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;

            // Look for two consecutive small sub-diagonal elements.
            let mut m = nu - 2;
            loop {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=nu {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // Double QR step on rows l..=n and columns m..=n.
            for k in m..nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            p += r * h[(k + 2, j)];
                            h[(k + 2, j)] -= p * z;
                        }
                        h[(k, j)] -= p * x;
                        h[(k + 1, j)] -= p * y;
                    }
                    for i in 0..=nu.min(k + 3) {
                        p = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            p += z * h[(i, k + 2)];
                            h[(i, k + 2)] -= p * r;
                        }
                        h[(i, k)] -= p;
                        h[(i, k + 1)] -= p * q;
                    }
                    for i in 0..=high {
                        p = x * v[(i, k)] + y * v[(i, k + 1)];
                        if notlast {
                            p += z * v[(i, k + 2)];
                            v[(i, k + 2)] -= p * r;
                        }
                        v[(i, k)] -= p;
                        v[(i, k + 1)] -= p * q;
                    }
                }
            }
        }
    }

    // Back-substitute to find vectors of the upper triangular form.
    if norm == 0.0 {
        return Ok(());
    }
    for nu in (0..nn).rev() {
        p = d[nu];
        q = e[nu];
        if q == 0.0 {
            // Real vector.
            let mut l = nu;
            h[(nu, nu)] = 1.0;
            for i in (0..nu).rev() {
                w = h[(i, i)] - p;
                r = 0.0;
                for j in l..=nu {
                    r += h[(i, j)] * h[(j, nu)];
                }
                if e[i] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i] == 0.0 {
                        h[(i, nu)] = if w != 0.0 { -r / w } else { -r / (eps * norm) };
                    } else {
                        // Solve real equations.
                        x = h[(i, i + 1)];
                        y = h[(i + 1, i)];
                        q = (d[i] - p) * (d[i] - p) + e[i] * e[i];
                        t = (x * s - z * r) / q;
                        h[(i, nu)] = t;
                        h[(i + 1, nu)] = if x.abs() > z.abs() {
                            (-r - w * t) / x
                        } else {
                            (-s - y * t) / z
                        };
                    }
                    // Overflow control.
                    t = h[(i, nu)].abs();
                    if (eps * t) * t > 1.0 {
                        for j in i..=nu {
                            h[(j, nu)] /= t;
                        }
                    }
                }
            }
        } else if q < 0.0 {
            // Complex vector; the last component is imaginary.
            let mut l = nu - 1;
            if h[(nu, nu - 1)].abs() > h[(nu - 1, nu)].abs() {
                h[(nu - 1, nu - 1)] = q / h[(nu, nu - 1)];
                h[(nu - 1, nu)] = -(h[(nu, nu)] - p) / h[(nu, nu - 1)];
            } else {
                let (cr, ci) = cdiv(0.0, -h[(nu - 1, nu)], h[(nu - 1, nu - 1)] - p, q);
                h[(nu - 1, nu - 1)] = cr;
                h[(nu - 1, nu)] = ci;
            }
            h[(nu, nu - 1)] = 0.0;
            h[(nu, nu)] = 1.0;
            for i in (0..nu.saturating_sub(1)).rev() {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=nu {
                    ra += h[(i, j)] * h[(j, nu - 1)];
                    sa += h[(i, j)] * h[(j, nu)];
                }
                w = h[(i, i)] - p;
                if e[i] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i] == 0.0 {
                        let (cr, ci) = cdiv(-ra, -sa, w, q);
                        h[(i, nu - 1)] = cr;
                        h[(i, nu)] = ci;
                    } else {
                        // Solve complex equations.
                        x = h[(i, i + 1)];
                        y = h[(i + 1, i)];
                        let mut vr = (d[i] - p) * (d[i] - p) + e[i] * e[i] - q * q;
                        let vi = (d[i] - p) * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps * norm * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (cr, ci) = cdiv(
                            x * r - z * ra + q * sa,
                            x * s - z * sa - q * ra,
                            vr,
                            vi,
                        );
                        h[(i, nu - 1)] = cr;
                        h[(i, nu)] = ci;
                        if x.abs() > z.abs() + q.abs() {
                            h[(i + 1, nu - 1)] = (-ra - w * h[(i, nu - 1)] + q * h[(i, nu)]) / x;
                            h[(i + 1, nu)] = (-sa - w * h[(i, nu)] - q * h[(i, nu - 1)]) / x;
                        } else {
                            let (cr, ci) =
                                cdiv(-r - y * h[(i, nu - 1)], -s - y * h[(i, nu)], z, q);
                            h[(i + 1, nu - 1)] = cr;
                            h[(i + 1, nu)] = ci;
                        }
                    }
                    // Overflow control.
                    t = h[(i, nu - 1)].abs().max(h[(i, nu)].abs());
                    if (eps * t) * t > 1.0 {
                        for j in i..=nu {
                            h[(j, nu - 1)] /= t;
                            h[(j, nu)] /= t;
                        }
                    }
                }
            }
        }
    }

    // Back transformation to eigenvectors of the original matrix.
    for j in (0..nn).rev() {
        for i in 0..=high {
            z = 0.0;
            for k in 0..=j.min(high) {
                z += v[(i, k)] * h[(k, j)];
            }
            v[(i, j)] = z;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smalldense::cmatvec;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn residual(a: &Mat, lambda: Complex64, x: &[Complex64]) -> f64 {
        let ax = cmatvec(&a.to_complex(), x).unwrap();
        ax.iter()
            .zip(x)
            .map(|(l, r)| (l - lambda * r).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn sorted(values: &[Complex64]) -> Vec<Complex64> {
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn diagonal() {
        let a = Mat::diag(&[0.9, 0.5]);
        let e = eig(&a).unwrap();
        let v = sorted(&e.values);
        assert!((v[0] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((v[1] - Complex64::new(0.9, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rotation_has_unit_circle_pair() {
        let th = PI / 8.0;
        let a = Mat::from_rows(&[&[th.cos(), -th.sin()], &[th.sin(), th.cos()]]).unwrap();
        let e = eig(&a).unwrap();
        let v = sorted(&e.values);
        assert!((v[0] - Complex64::from_polar(1.0, -th)).norm() < 1e-14);
        assert!((v[1] - Complex64::from_polar(1.0, th)).norm() < 1e-14);
        for k in 0..2 {
            assert!(residual(&a, e.values[k], e.vectors.col(k)) < 1e-14);
        }
    }

    #[test]
    fn nilpotent_is_defective() {
        let a = Mat::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let e = eig(&a).unwrap();
        assert!(e.values.iter().all(|z| z.norm() < 1e-15));
        // only e1 is an eigenvector; it must be among the returned columns
        let best = (0..2)
            .map(|k| residual(&a, e.values[k], e.vectors.col(k)))
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-12);
    }

    #[test]
    fn one_by_one_and_empty() {
        let e = eig(&Mat::diag(&[-2.0])).unwrap();
        assert_eq!(e.values, vec![Complex64::new(-2.0, 0.0)]);
        assert_eq!(e.vectors[(0, 0)], Complex64::new(1.0, 0.0));
        assert!(eig(&Mat::zeros(0, 0)).unwrap().values.is_empty());
    }

    #[test]
    fn vectors_are_unit_with_positive_real_pivot() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let a = Mat::from_fn(9, 9, |_, _| rng.random_range(-1.0..1.0));
        let e = eig(&a).unwrap();
        for k in 0..9 {
            let col = e.vectors.col(k);
            let norm: f64 = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-13);
            let pivot = col
                .iter()
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .unwrap();
            assert!(pivot.im.abs() < 1e-12 && pivot.re > 0.0);
        }
    }

    #[test]
    fn rejects_nonfinite() {
        let mut a = Mat::identity(3);
        a[(1, 2)] = f64::NAN;
        assert!(matches!(eig(&a), Err(Error::NonFinite)));
    }

    proptest! {
        #[test]
        fn residual_property(n in 1usize..30, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let e = eig(&a).unwrap();
            let scale = a.frobenius_norm();
            for k in 0..n {
                prop_assert!(residual(&a, e.values[k], e.vectors.col(k)) < 1e-8 * scale);
            }
        }
    }
}
