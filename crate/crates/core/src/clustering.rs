//! Cosine clustering statistics of logit gradients.
//!
//! All three statistics are averages of pairwise cosines over `mu != nu`.
//! They are computed exactly without a pair loop: with unit vectors `u`,
//! `sum_{mu != nu} <u_mu, u_nu> = |sum_mu u_mu|^2 - sum_mu |u_mu|^2`, and
//! likewise for the cross-logit sums. The cost is `O(N C D)` plus `O(N C^2 D)`
//! for the different-logit statistic.

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView3, Axis};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::spectra::dot;

/// `<u, v> / (|u| |v|)`, clamped to `[-1, 1]`.
pub fn cosine(u: ArrayView1<f64>, v: ArrayView1<f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!("lengths {} and {}", u.len(), v.len())));
    }
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if nu == 0.0 {
        return Err(Error::ZeroVector("first argument"));
    }
    if nv == 0.0 {
        return Err(Error::ZeroVector("second argument"));
    }
    Ok((u.dot(&v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Gradients normalized to unit length, `N x C x D`.
fn unit_gradients(grads: ArrayView3<f64>) -> Result<Array3<f64>> {
    let mut out = grads.to_owned();
    for mut block in out.outer_iter_mut() {
        for mut row in block.outer_iter_mut() {
            let norm = row.dot(&row).sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroVector("logit gradient"));
            }
            row /= norm;
        }
    }
    Ok(out)
}

fn check_labels(grads: ArrayView3<f64>, labels: &[usize]) -> Result<()> {
    let (n, c, _) = grads.dim();
    if labels.len() != n {
        return Err(Error::Shape(format!(
            "{} labels for {n} examples",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::Shape(format!("label {bad} with {c} classes")));
    }
    Ok(())
}

/// Mean cosine among distinct pairs of the rows `units[mu, k]` for `mu` in
/// `members`.
fn mean_pair_cosine(units: &Array3<f64>, k: usize, members: impl Iterator<Item = usize>) -> f64 {
    let d = units.dim().2;
    let mut sum = Array1::<f64>::zeros(d);
    let mut count = 0usize;
    for mu in members {
        sum += &units.slice(ndarray::s![mu, k, ..]);
        count += 1;
    }
    let pairs = (count * (count - 1)) as f64;
    ((sum.dot(&sum) - count as f64) / pairs).clamp(-1.0, 1.0)
}

/// Same-logit-same-class terms: for each class `k`, the mean cosine between
/// gradients of logit `k` over pairs of distinct examples labelled `k`.
pub fn per_class_slsc(grads: ArrayView3<f64>, labels: &[usize]) -> Result<Array1<f64>> {
    check_labels(grads, labels)?;
    let c = grads.dim().1;
    let mut counts = vec![0usize; c];
    for &l in labels {
        counts[l] += 1;
    }
    if let Some(k) = counts.iter().position(|&n| n < 2) {
        return Err(Error::ClassTooSmall {
            class: k,
            count: counts[k],
            needed: 2,
        });
    }
    let units = unit_gradients(grads)?;
    Ok((0..c)
        .map(|k| {
            let members = labels.iter().enumerate().filter(|(_, &l)| l == k).map(|(mu, _)| mu);
            mean_pair_cosine(&units, k, members)
        })
        .collect())
}

/// Class average of [`per_class_slsc`].
pub fn q_slsc(grads: ArrayView3<f64>, labels: &[usize]) -> Result<f64> {
    Ok(per_class_slsc(grads, labels)?.mean().unwrap_or(f64::NAN))
}

/// Same-logit terms: for each logit `k`, the mean cosine between gradients
/// of logit `k` over all pairs of distinct examples.
pub fn per_logit_sl(grads: ArrayView3<f64>) -> Result<Array1<f64>> {
    let (n, c, _) = grads.dim();
    if n < 2 {
        return Err(Error::param("n_examples", "at least 2 examples needed"));
    }
    let units = unit_gradients(grads)?;
    Ok((0..c).map(|k| mean_pair_cosine(&units, k, 0..n)).collect())
}

pub fn q_sl(grads: ArrayView3<f64>) -> Result<f64> {
    Ok(per_logit_sl(grads)?.mean().unwrap_or(f64::NAN))
}

/// Mean cosine between gradients of different logits of distinct examples.
pub fn q_dl(grads: ArrayView3<f64>) -> Result<f64> {
    let (n, c, _) = grads.dim();
    if n < 2 {
        return Err(Error::param("n_examples", "at least 2 examples needed"));
    }
    if c < 2 {
        return Err(Error::param("n_classes", "at least 2 logits needed"));
    }
    let units = unit_gradients(grads)?;
    let sums = units.sum_axis(Axis(0));
    let mut total = 0.0;
    for k in 0..c {
        for l in 0..c {
            if k == l {
                continue;
            }
            let mut same_example = 0.0;
            for block in units.outer_iter() {
                same_example += dot(
                    block.row(k).as_slice().unwrap(),
                    block.row(l).as_slice().unwrap(),
                );
            }
            total += sums.row(k).dot(&sums.row(l)) - same_example;
        }
    }
    let pairs = (n * (n - 1) * c * (c - 1)) as f64;
    Ok((total / pairs).clamp(-1.0, 1.0))
}

/// `SNR / (SNR + 1)` with `SNR = sigma_c^2 / sigma_e^2`.
pub fn predicted_q_sl(sigma_c: f64, sigma_e: f64) -> Result<f64> {
    if sigma_c == 0.0 && sigma_e == 0.0 {
        return Err(Error::param("sigma_c", "sigma_c and sigma_e are both zero"));
    }
    let (s, e) = (sigma_c * sigma_c, sigma_e * sigma_e);
    Ok(s / (s + e))
}

/// Row `k` is the mean of the logit-`k` gradients over examples labelled `k`.
pub fn empirical_class_means(grads: ArrayView3<f64>, labels: &[usize]) -> Result<Array2<f64>> {
    check_labels(grads, labels)?;
    let (_, c, d) = grads.dim();
    let mut means = Array2::zeros((c, d));
    let mut counts = vec![0usize; c];
    for (block, &l) in grads.outer_iter().zip(labels) {
        let mut row = means.row_mut(l);
        row += &block.row(l);
        counts[l] += 1;
    }
    for (k, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::ClassTooSmall {
                class: k,
                count,
                needed: 1,
            });
        }
        let mut row = means.row_mut(k);
        row /= count as f64;
    }
    Ok(means)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusteringReport {
    pub q_slsc: f64,
    pub q_sl: f64,
    pub q_dl: f64,
    /// Same-logit-same-class average of each class; `q_slsc` is their mean.
    pub per_class_q: Vec<f64>,
    /// Same-logit average of each logit; `q_sl` is their mean.
    pub per_logit_q_sl: Vec<f64>,
    pub class_counts: Vec<usize>,
}

/// All statistics at once. The three are independent and run through `exec`.
pub fn clustering_report(
    grads: ArrayView3<f64>,
    labels: &[usize],
    exec: Exec,
) -> Result<ClusteringReport> {
    check_labels(grads, labels)?;
    let mut counts = vec![0usize; grads.dim().1];
    for &l in labels {
        counts[l] += 1;
    }
    enum Part {
        Slsc(Array1<f64>),
        Sl(Array1<f64>),
        Dl(f64),
    }
    let mut parts = exec
        .try_map(3, |i| match i {
            0 => per_class_slsc(grads, labels).map(Part::Slsc),
            1 => per_logit_sl(grads).map(Part::Sl),
            _ => q_dl(grads).map(Part::Dl),
        })?
        .into_iter();
    let (Some(Part::Slsc(per_class)), Some(Part::Sl(per_logit)), Some(Part::Dl(q_dl))) =
        (parts.next(), parts.next(), parts.next())
    else {
        unreachable!("parts are produced in index order")
    };
    Ok(ClusteringReport {
        q_slsc: per_class.mean().unwrap_or(f64::NAN),
        q_sl: per_logit.mean().unwrap_or(f64::NAN),
        q_dl,
        per_class_q: per_class.to_vec(),
        per_logit_q_sl: per_logit.to_vec(),
        class_counts: counts,
    })
}
