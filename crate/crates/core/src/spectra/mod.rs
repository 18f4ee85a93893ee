//! Symmetric eigendecomposition and the spectral diagnostics built on it.

mod eigh;

pub(crate) use eigh::dot;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use ndarray::linalg::general_mat_mul;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hessian::{symmetrize, HessianMatrix, WeightGradient};
use crate::rng::RngStream;

/// Inputs whose largest asymmetry exceeds this (relative to the largest
/// entry) are rejected by [`eigh`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Eigenvalues in descending order with the matching orthonormal
/// eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct SymmetricSpectrum {
    pub eigenvalues: Array1<f64>,
    /// Column `i` pairs with `eigenvalues[i]`. Each column is signed so that
    /// its largest-magnitude component (first one on ties) is positive.
    pub eigenvectors: Array2<f64>,
}

impl SymmetricSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.sum()
    }

    pub fn eigenvector(&self, i: usize) -> ArrayView1<'_, f64> {
        self.eigenvectors.column(i)
    }
}

fn check_symmetric(h: ArrayView2<f64>) -> Result<()> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::Shape(format!("{}x{} matrix is not square", n, h.ncols())));
    }
    let scale = h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((h[[i, j]] - h[[j, i]]).abs());
        }
    }
    if asym > SYMMETRY_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// Row-major copy of the symmetric part of `h`.
fn symmetric_copy(h: ArrayView2<f64>) -> Vec<f64> {
    let n = h.nrows();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (h[[i, j]] + h[[j, i]]);
        }
    }
    a
}

fn descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Full eigensystem of a symmetric matrix.
pub fn eigh(h: ArrayView2<f64>) -> Result<SymmetricSpectrum> {
    check_symmetric(h)?;
    let n = h.nrows();
    let (values, rows) = eigh::eigh_raw(symmetric_copy(h), n)?;
    let order = descending(&values);
    let eigenvalues: Array1<f64> = order.iter().map(|&i| values[i]).collect();
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        let v = &rows[i * n..(i + 1) * n];
        let mut pivot = 0;
        for (j, x) in v.iter().enumerate() {
            if x.abs() > v[pivot].abs() {
                pivot = j;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (j, &x) in v.iter().enumerate() {
            eigenvectors[[j, col]] = sign * x;
        }
    }
    Ok(SymmetricSpectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only, descending.
pub fn eigvalsh(h: ArrayView2<f64>) -> Result<Array1<f64>> {
    check_symmetric(h)?;
    let mut values = eigh::eigvals_raw(symmetric_copy(h), h.nrows())?;
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(Array1::from(values))
}

/// Largest eigenvalue magnitude.
pub fn spectral_norm(eigenvalues: ArrayView1<f64>) -> f64 {
    eigenvalues.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `trace / spectral_norm`.
pub fn trace_norm_ratio(eigenvalues: ArrayView1<f64>) -> Result<f64> {
    let norm = spectral_norm(eigenvalues);
    if norm == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(eigenvalues.sum() / norm)
}

/// Parameters of the gap-based outlier detector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OutlierConfig {
    /// Number of leading eigenvalues searched for the bulk edge.
    pub max_candidates: usize,
    /// Minimum relative gap that separates an outlier from what lies below.
    pub tau: f64,
}

impl OutlierConfig {
    /// Window of `3C` candidates with threshold 2.
    pub fn for_classes(n_classes: usize) -> Self {
        OutlierConfig {
            max_candidates: 3 * n_classes,
            tau: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutlierReport {
    pub n_outliers: usize,
    /// Largest eigenvalue of the bulk.
    pub bulk_edge: f64,
    pub outlier_values: Vec<f64>,
}

/// Relative gaps `(l[i] - l[i+1]) / max(l[i+1], eps)` over the candidate
/// window of a descending spectrum, with `eps = 1e-10 * |l[0]|`.
pub fn relative_gaps(eigenvalues: &[f64], max_candidates: usize) -> Vec<f64> {
    let Some(&top) = eigenvalues.first() else {
        return Vec::new();
    };
    let eps = (1e-10 * top.abs()).max(f64::MIN_POSITIVE);
    let window = max_candidates.min(eigenvalues.len().saturating_sub(1));
    (0..window)
        .map(|i| (eigenvalues[i] - eigenvalues[i + 1]) / eigenvalues[i + 1].max(eps))
        .collect()
}

/// Count outliers above the bulk of a descending spectrum.
///
/// The bulk edge is placed below the deepest candidate whose relative gap
/// to the next eigenvalue exceeds `tau`; everything above it is an outlier.
/// No such gap means no outliers, and `bulk_edge` is then the top eigenvalue.
pub fn detect_outliers(eigenvalues: &[f64], config: &OutlierConfig) -> OutlierReport {
    let gaps = relative_gaps(eigenvalues, config.max_candidates);
    let n_outliers = gaps
        .iter()
        .rposition(|&g| g > config.tau)
        .map_or(0, |i| i + 1);
    OutlierReport {
        n_outliers,
        bulk_edge: eigenvalues.get(n_outliers).copied().unwrap_or(f64::NAN),
        outlier_values: eigenvalues[..n_outliers].to_vec(),
    }
}

/// Cosines between a gradient and each eigenvector, and their running sum
/// of squares.
#[derive(Clone, Debug)]
pub struct GradientOverlaps {
    pub cosines: Array1<f64>,
    /// `cumulative_power[j] = sum_{i <= j} cosines[i]^2`.
    pub cumulative_power: Array1<f64>,
}

impl GradientOverlaps {
    /// Fraction of squared gradient norm in the top `k` eigenvectors.
    pub fn power_in_top(&self, k: usize) -> f64 {
        match k {
            0 => 0.0,
            k => self.cumulative_power[k.min(self.cumulative_power.len()) - 1],
        }
    }
}

pub fn gradient_overlaps(
    spectrum: &SymmetricSpectrum,
    gradient: &WeightGradient,
) -> Result<GradientOverlaps> {
    let norm = gradient.norm();
    if norm == 0.0 {
        return Err(Error::ZeroGradient);
    }
    let cosines = spectrum.eigenvectors.t().dot(&gradient.0) / norm;
    let mut running = 0.0;
    let cumulative_power = cosines
        .iter()
        .map(|c| {
            running += c * c;
            running
        })
        .collect();
    Ok(GradientOverlaps {
        cosines,
        cumulative_power,
    })
}

/// `dim x d` matrix with orthonormal columns spanning a uniformly random
/// `d`-plane: Gaussian columns orthonormalized by two passes of modified
/// Gram-Schmidt. A column that collapses numerically is redrawn.
pub fn random_orthonormal_basis(dim: usize, d: usize, stream: &mut RngStream) -> Result<Array2<f64>> {
    if d == 0 || d > dim {
        return Err(Error::param(
            "hyperplane_dim",
            format!("must lie in [1, {dim}], got {d}"),
        ));
    }
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut v = vec![0.0; dim];
    while cols.len() < d {
        stream.fill_normal(&mut v, 1.0);
        let original = eigh::dot(&v, &v).sqrt();
        for _ in 0..2 {
            for q in &cols {
                let proj = eigh::dot(q, &v);
                for (x, &qi) in v.iter_mut().zip(q) {
                    *x -= proj * qi;
                }
            }
        }
        let norm = eigh::dot(&v, &v).sqrt();
        if norm <= 1e-10 * original {
            continue;
        }
        cols.push(v.iter().map(|x| x / norm).collect());
    }
    let mut basis = Array2::zeros((dim, d));
    for (j, col) in cols.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            basis[[i, j]] = x;
        }
    }
    Ok(basis)
}

/// `B^T H B`, symmetrized.
pub fn project_hessian(h: &HessianMatrix, basis: ArrayView2<f64>) -> Result<Array2<f64>> {
    if basis.nrows() != h.dim() {
        return Err(Error::Shape(format!(
            "basis has {} rows, Hessian is {}x{}",
            basis.nrows(),
            h.dim(),
            h.dim()
        )));
    }
    let d = basis.ncols();
    let mut hb = Array2::zeros((h.dim(), d));
    general_mat_mul(1.0, &h.0, &basis, 0.0, &mut hb);
    let mut out = Array2::zeros((d, d));
    general_mat_mul(1.0, &basis.t(), &hb, 0.0, &mut out);
    symmetrize(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, substream};
    use ndarray::{array, Array};

    fn random_symmetric(n: usize, seed: u64) -> Array2<f64> {
        let g = gaussian_matrix(&mut substream(seed, "sym"), n, n, 1.0).unwrap();
        (&g + &g.t()) * 0.5
    }

    fn frobenius(a: &Array2<f64>) -> f64 {
        a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn reconstruct(s: &SymmetricSpectrum) -> Array2<f64> {
        let v = &s.eigenvectors;
        let scaled = v * &s.eigenvalues.view().insert_axis(ndarray::Axis(0));
        scaled.dot(&v.t())
    }

    #[test]
    fn two_by_two_values() {
        let s = eigh(array![[2.0, 1.0], [1.0, 2.0]].view()).unwrap();
        assert!((s.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((s.eigenvalues[1] - 1.0).abs() < 1e-14);
        // Sign convention: the largest component is positive.
        for i in 0..2 {
            let v = s.eigenvector(i);
            let pivot = if v[0].abs() >= v[1].abs() { v[0] } else { v[1] };
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn identity_spectrum() {
        let s = eigh(Array::eye(50).view()).unwrap();
        assert!(s.eigenvalues.iter().all(|&x| (x - 1.0).abs() < 1e-14));
        let gram = s.eigenvectors.t().dot(&s.eigenvectors);
        assert!((gram - Array2::<f64>::eye(50)).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn random_reconstruction() {
        let h = random_symmetric(50, 1);
        let s = eigh(h.view()).unwrap();
        let err = frobenius(&(reconstruct(&s) - &h));
        assert!(err < 1e-10 * frobenius(&h), "{err}");
        assert!(s.eigenvalues.windows(2).into_iter().all(|w| w[0] >= w[1]));
    }

    #[test]
    fn values_only_path_agrees() {
        let h = random_symmetric(40, 2);
        let full = eigh(h.view()).unwrap().eigenvalues;
        let vals = eigvalsh(h.view()).unwrap();
        assert!((full - vals).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn rejects_asymmetric_and_non_square() {
        let a = array![[1.0, 2.0], [0.0, 1.0]];
        assert!(matches!(eigh(a.view()), Err(Error::NotSymmetric { .. })));
        let b = Array2::<f64>::zeros((2, 3));
        assert!(matches!(eigh(b.view()), Err(Error::Shape(_))));
    }

    #[test]
    fn norm_and_ratio_examples() {
        assert_eq!(spectral_norm(array![3.0, -5.0].view()), 5.0);
        assert_eq!(spectral_norm(array![0.0, 0.0].view()), 0.0);
        assert!(matches!(
            trace_norm_ratio(array![0.0, 0.0].view()),
            Err(Error::UndefinedRatio)
        ));
        assert_eq!(trace_norm_ratio(Array1::ones(7).view()).unwrap(), 7.0);
        assert_eq!(trace_norm_ratio(array![4.0, 0.0, 0.0].view()).unwrap(), 1.0);
        assert_eq!(trace_norm_ratio(array![2.0, 1.0, 1.0].view()).unwrap(), 2.0);
    }

    #[test]
    fn outliers_on_identity_and_spiked_diagonal() {
        let cfg = OutlierConfig::for_classes(10);
        let r = detect_outliers(&vec![1.0; 100], &cfg);
        assert_eq!(r.n_outliers, 0);
        assert_eq!(r.bulk_edge, 1.0);

        // diag(10, 10, 1, ..., 1) plus symmetric noise of scale 0.01.
        let mut h = Array2::<f64>::eye(100);
        h[[0, 0]] = 10.0;
        h[[1, 1]] = 10.0;
        h = h + random_symmetric(100, 3) * 0.01;
        let vals = eigvalsh(h.view()).unwrap().to_vec();
        let r = detect_outliers(&vals, &cfg);
        // Independent scan: only the second gap is large.
        let big: Vec<usize> = (0..30)
            .filter(|&i| (vals[i] - vals[i + 1]) / vals[i + 1] > 2.0)
            .collect();
        assert_eq!(big, vec![1]);
        assert_eq!(r.n_outliers, 2);
        assert_eq!(r.outlier_values.len(), 2);
        assert!(r.outlier_values.iter().all(|&v| v > r.bulk_edge));
    }

    #[test]
    fn rank_deficient_tail_is_not_an_outlier_cascade() {
        // Roundoff-sized eigenvalues below a clean rank-3 spectrum.
        let vals = [5.0, 4.0, 3.0, 1e-17, 3e-18, -2e-18, 1e-19];
        let r = detect_outliers(&vals, &OutlierConfig::for_classes(3));
        assert_eq!(r.n_outliers, 3);
    }

    #[test]
    fn overlaps_examples() {
        let h = random_symmetric(20, 4);
        let s = eigh(h.view()).unwrap();
        let g = WeightGradient(s.eigenvector(0).to_owned() * 3.0);
        let o = gradient_overlaps(&s, &g).unwrap();
        assert!((o.power_in_top(1) - 1.0).abs() < 1e-12);

        let mut orth = Array1::zeros(20);
        for i in 5..20 {
            orth.scaled_add(1.0 + i as f64, &s.eigenvector(i));
        }
        let o = gradient_overlaps(&s, &WeightGradient(orth)).unwrap();
        assert!(o.power_in_top(5).abs() < 1e-12);
        assert!((o.power_in_top(20) - 1.0).abs() < 1e-10);

        assert!(matches!(
            gradient_overlaps(&s, &WeightGradient(Array1::zeros(20))),
            Err(Error::ZeroGradient)
        ));
    }

    #[test]
    fn basis_shapes_and_orthonormality() {
        let mut s = substream(1, "basis");
        for (dim, d) in [(30, 30), (30, 1), (200, 10)] {
            let b = random_orthonormal_basis(dim, d, &mut s).unwrap();
            assert_eq!(b.dim(), (dim, d));
            let gram = b.t().dot(&b);
            assert!((gram - Array2::<f64>::eye(d)).iter().all(|x| x.abs() < 1e-10));
        }
        assert!(random_orthonormal_basis(5, 6, &mut s).is_err());
        assert!(random_orthonormal_basis(5, 0, &mut s).is_err());
    }

    #[test]
    fn projection_examples() {
        let n = 25;
        let h = HessianMatrix(random_symmetric(n, 5));
        let full = eigvalsh(h.view()).unwrap();

        let square = random_orthonormal_basis(n, n, &mut substream(2, "b")).unwrap();
        let same = eigvalsh(project_hessian(&h, square.view()).unwrap().view()).unwrap();
        assert!((&same - &full).iter().all(|x| x.abs() < 1e-10));

        let ident = HessianMatrix(Array::eye(n));
        let b = random_orthonormal_basis(n, 4, &mut substream(3, "b")).unwrap();
        let p = project_hessian(&ident, b.view()).unwrap();
        assert!((p - Array2::<f64>::eye(4)).iter().all(|x| x.abs() < 1e-12));

        let b = random_orthonormal_basis(n, 6, &mut substream(4, "b")).unwrap();
        let proj = eigvalsh(project_hessian(&h, b.view()).unwrap().view()).unwrap();
        // Cauchy interlacing: full[i] >= proj[i] >= full[i + n - d].
        for i in 0..6 {
            assert!(proj[i] <= full[i] + 1e-12);
            assert!(proj[i] >= full[i + n - 6] - 1e-12);
        }
    }
}
