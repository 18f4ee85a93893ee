//! Dense symmetric eigensolver: Householder reduction to tridiagonal form
//! followed by the implicit-shift QL iteration (the EISPACK `tql2` scheme).
//!
//! Storage is row-major throughout. The Householder update and the
//! accumulation of the orthogonal factor only touch contiguous rows, and
//! the QL rotations are applied to the rows of `Q^T`, so every inner loop
//! runs over contiguous memory.

use crate::error::{Error, Result};

/// Maximum QL sweeps spent on a single eigenvalue.
const MAX_SWEEPS: usize = 60;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..n {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`.
#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Symmetric tridiagonal `T = Q^T A Q` plus the Householder data for `Q`.
struct Tridiagonal {
    n: usize,
    diag: Vec<f64>,
    /// `off[i] = T[i+1][i]`, with a trailing zero.
    off: Vec<f64>,
    /// Row `k` holds the reflector for step `k` in columns `k+1..n`.
    reflectors: Vec<f64>,
    betas: Vec<f64>,
}

/// Householder tridiagonalization of the row-major symmetric `a` (consumed).
fn tridiagonalize(mut a: Vec<f64>, n: usize) -> Tridiagonal {
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let mut betas = vec![0.0; n];
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        diag[k] = a[k * n + k];
        let m = n - k - 1;
        let start = k + 1;

        // x = A[k+1.., k] = A[k, k+1..] by symmetry.
        let x = &a[k * n + start..k * n + n];
        let scale: f64 = x.iter().map(|v| v.abs()).sum();
        if scale == 0.0 {
            off[k] = 0.0;
            betas[k] = 0.0;
            continue;
        }
        let norm = {
            let s: f64 = x.iter().map(|v| (v / scale) * (v / scale)).sum();
            scale * s.sqrt()
        };
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = x.to_vec();
        v[0] -= alpha;
        let vtv = dot(&v, &v);
        off[k] = alpha;
        if vtv == 0.0 {
            betas[k] = 0.0;
            continue;
        }
        let beta = 2.0 / vtv;
        betas[k] = beta;

        // p = beta * A22 v
        for i in 0..m {
            let row = &a[(start + i) * n + start..(start + i) * n + n];
            p[i] = beta * dot(row, &v);
        }
        // w = p - (beta p.v / 2) v
        let kappa = 0.5 * beta * dot(&p[..m], &v);
        for i in 0..m {
            p[i] -= kappa * v[i];
        }
        // A22 -= v w^T + w v^T
        for i in 0..m {
            let (vi, wi) = (v[i], p[i]);
            let row = &mut a[(start + i) * n + start..(start + i) * n + n];
            for ((r, &vj), &wj) in row.iter_mut().zip(&v).zip(&p[..m]) {
                *r -= vi * wj + wi * vj;
            }
        }
        a[k * n + start..k * n + n].copy_from_slice(&v);
    }
    if n >= 2 {
        diag[n - 2] = a[(n - 2) * n + n - 2];
        diag[n - 1] = a[(n - 1) * n + n - 1];
        off[n - 2] = a[(n - 1) * n + n - 2];
    } else if n == 1 {
        diag[0] = a[0];
    }
    Tridiagonal {
        n,
        diag,
        off,
        reflectors: a,
        betas,
    }
}

impl Tridiagonal {
    /// `Q^T` (row-major), where `A = Q T Q^T`.
    fn q_transpose(&self) -> Vec<f64> {
        let n = self.n;
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n + i] = 1.0;
        }
        // Q = H_0 H_1 ... H_{n-3}, accumulated from the right-most factor.
        let mut w = vec![0.0; n];
        for k in (0..n.saturating_sub(2)).rev() {
            let beta = self.betas[k];
            if beta == 0.0 {
                continue;
            }
            let start = k + 1;
            let v = &self.reflectors[k * n + start..k * n + n];
            let w = &mut w[start..n];
            w.iter_mut().for_each(|x| *x = 0.0);
            for (i, &vi) in v.iter().enumerate() {
                let row = &q[(start + i) * n + start..(start + i) * n + n];
                axpy(vi, row, w);
            }
            for (i, &vi) in v.iter().enumerate() {
                let row = &mut q[(start + i) * n + start..(start + i) * n + n];
                axpy(-beta * vi, w, row);
            }
        }
        // Transpose in place.
        for i in 0..n {
            for j in (i + 1)..n {
                q.swap(i * n + j, j * n + i);
            }
        }
        q
    }
}

/// Implicit QL on the tridiagonal `(d, e)`; rotations are also applied to
/// the rows of `z` when given. On return `d` holds the (unsorted)
/// eigenvalues and row `i` of `z` the eigenvector for `d[i]`.
fn tql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS {
                    return Err(Error::NoConvergence {
                        index: l,
                        iterations: MAX_SWEEPS,
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    if let Some(z) = z.as_deref_mut() {
                        let (lo, hi) = z.split_at_mut((i + 1) * n);
                        let zi = &mut lo[i * n..];
                        let zi1 = &mut hi[..n];
                        for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                            let t = *b;
                            *b = s * *a + c * t;
                            *a = c * *a - s * t;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Eigenvalues and row-stored eigenvectors (row `i` pairs with value `i`),
/// unsorted.
pub(crate) fn eigh_raw(a: Vec<f64>, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let tri = tridiagonalize(a, n);
    let mut z = tri.q_transpose();
    let Tridiagonal { mut diag, mut off, .. } = tri;
    tql(&mut diag, &mut off, Some(&mut z))?;
    Ok((diag, z))
}

/// Eigenvalues only, unsorted.
pub(crate) fn eigvals_raw(a: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    let Tridiagonal { mut diag, mut off, .. } = tridiagonalize(a, n);
    tql(&mut diag, &mut off, None)?;
    Ok(diag)
}
