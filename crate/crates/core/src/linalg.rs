//! Small dense helpers on top of faer.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// diag(d) * m
pub fn scale_rows(d: &[f64], m: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| d[i] * m[(i, j)])
}

/// m * diag(d)
pub fn scale_cols(m: &Mat<f64>, d: &[f64]) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * d[j])
}

pub fn matvec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(m.ncols(), x.len());
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum())
        .collect()
}

pub fn matvec_complex(m: &Mat<f64>, x: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(m.ncols(), x.len());
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| x[j] * m[(i, j)]).sum())
        .collect()
}

pub fn transpose_matvec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(m.nrows(), x.len());
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)] * x[i]).sum())
        .collect()
}

pub fn bilinear(a: &[f64], m: &Mat<f64>, b: &[f64]) -> f64 {
    a.iter().zip(matvec(m, b)).map(|(x, y)| x * y).sum()
}

/// Assemble a 2x2 block matrix from equally sized square blocks.
pub fn block2(a11: &Mat<f64>, a12: &Mat<f64>, a21: &Mat<f64>, a22: &Mat<f64>) -> Mat<f64> {
    let n = a11.nrows();
    Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) => a11[(i, j)],
        (true, false) => a12[(i, j - n)],
        (false, true) => a21[(i - n, j)],
        (false, false) => a22[(i - n, j - n)],
    })
}

pub fn frobenius(m: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)] * m[(i, j)];
        }
    }
    s.sqrt()
}

/// Largest singular value by power iteration on m^T m from a fixed start.
pub fn spectral_norm(m: &Mat<f64>) -> f64 {
    let n = m.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..n).map(|j| 1.0 + 0.5 * ((j as f64) * 0.7).sin()).collect();
    let mut sigma = 0.0;
    for _ in 0..200 {
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let w = matvec(m, &v);
        let s = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = transpose_matvec(m, &w);
        if (s - sigma).abs() <= 1e-12 * s {
            return s;
        }
        sigma = s;
    }
    sigma
}

/// Orthonormal basis (n x (n-1)) of the complement of w, from the
/// Householder reflector that maps w / |w| to e_1.
pub fn complement_basis(w: &[f64]) -> Mat<f64> {
    let n = w.len();
    let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut v: Vec<f64> = w.iter().map(|x| x / nw).collect();
    // v = u + sign(u_0) e_1 avoids cancellation
    let s = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += s;
    let vv: f64 = v.iter().map(|x| x * x).sum();
    Mat::from_fn(n, n - 1, |i, j| {
        let col = j + 1;
        let id = if i == col { 1.0 } else { 0.0 };
        id - 2.0 * v[i] * v[col] / vv
    })
}

/// Upper Hessenberg reduction A = Q H Q^T for repeated shifted solves
/// (z I + A) x = b.
pub struct ShiftedSolver {
    q: Mat<f64>,
    h: Mat<f64>,
}

impl ShiftedSolver {
    pub fn new(a: &Mat<f64>) -> Self {
        let n = a.nrows();
        let mut h = a.clone();
        let mut q = Mat::<f64>::identity(n, n);
        for k in 0..n.saturating_sub(2) {
            let alpha: f64 = ((k + 1)..n).map(|i| h[(i, k)] * h[(i, k)]).sum::<f64>().sqrt();
            if alpha == 0.0 {
                continue;
            }
            let mut v: Vec<f64> = ((k + 1)..n).map(|i| h[(i, k)]).collect();
            let s = if v[0] >= 0.0 { 1.0 } else { -1.0 };
            v[0] += s * alpha;
            let vv: f64 = v.iter().map(|x| x * x).sum();
            if vv == 0.0 {
                continue;
            }
            // H <- P H P with P = I - 2 v v^T / vv acting on rows/cols k+1..n
            for j in 0..n {
                let d: f64 = v.iter().enumerate().map(|(l, vl)| vl * h[(k + 1 + l, j)]).sum();
                let f = 2.0 * d / vv;
                for (l, vl) in v.iter().enumerate() {
                    h[(k + 1 + l, j)] -= f * vl;
                }
            }
            for i in 0..n {
                let d: f64 = v.iter().enumerate().map(|(l, vl)| vl * h[(i, k + 1 + l)]).sum();
                let f = 2.0 * d / vv;
                for (l, vl) in v.iter().enumerate() {
                    h[(i, k + 1 + l)] -= f * vl;
                }
            }
            for i in 0..n {
                let d: f64 = v.iter().enumerate().map(|(l, vl)| vl * q[(i, k + 1 + l)]).sum();
                let f = 2.0 * d / vv;
                for (l, vl) in v.iter().enumerate() {
                    q[(i, k + 1 + l)] -= f * vl;
                }
            }
            for i in (k + 2)..n {
                h[(i, k)] = 0.0;
            }
        }
        Self { q, h }
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn solve(&self, z: Complex64, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        // c = Q^T b
        let mut c: Vec<Complex64> = (0..n)
            .map(|j| (0..n).map(|i| b[i] * self.q[(i, j)]).sum())
            .collect();
        // Gaussian elimination with adjacent-row pivoting on z I + H
        let mut m: Vec<Vec<Complex64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let v = Complex64::new(self.h[(i, j)], 0.0);
                        if i == j {
                            v + z
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        let scale = self.h_norm().max(z.norm()).max(1.0);
        for k in 0..n {
            if k + 1 < n && m[k + 1][k].norm() > m[k][k].norm() {
                m.swap(k, k + 1);
                c.swap(k, k + 1);
            }
            let p = m[k][k];
            if p.norm() <= 1e-300 * scale {
                return Err(Error::Linalg("singular shifted Hessenberg system".into()));
            }
            if k + 1 < n {
                let f = m[k + 1][k] / p;
                if f != Complex64::new(0.0, 0.0) {
                    let (top, bottom) = m.split_at_mut(k + 1);
                    let (rk, rk1) = (&top[k], &mut bottom[0]);
                    for j in k..n {
                        rk1[j] -= f * rk[j];
                    }
                    let ck = c[k];
                    c[k + 1] -= f * ck;
                }
            }
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for k in (0..n).rev() {
            let mut s = c[k];
            for j in (k + 1)..n {
                s -= m[k][j] * x[j];
            }
            x[k] = s / m[k][k];
        }
        Ok((0..n)
            .map(|i| (0..n).map(|j| x[j] * self.q[(i, j)]).sum())
            .collect())
    }

    fn h_norm(&self) -> f64 {
        frobenius(&self.h)
    }
}
