//! Softmax / cross-entropy layer: logits, probabilities, labels, and the
//! logit-space gradient and Hessian of the loss.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::rng::{gaussian_matrix, RngStream};

/// Logits, their softmax probabilities and the assigned labels.
#[derive(Clone, Debug)]
pub struct LogitEnsemble {
    /// `N x C`.
    pub logits: Array2<f64>,
    /// `N x C`, each row a probability vector.
    pub probs: Array2<f64>,
    /// Class index per example (the one-hot target).
    pub labels: Vec<usize>,
}

impl LogitEnsemble {
    pub fn new(logits: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let (n, c) = logits.dim();
        if labels.len() != n {
            return Err(Error::Shape(format!(
                "{} labels for {} examples",
                labels.len(),
                n
            )));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= c) {
            return Err(Error::Shape(format!(
                "label {l} of example {i} is not below {c} classes"
            )));
        }
        let probs = softmax_probs(logits.view());
        Ok(LogitEnsemble {
            logits,
            probs,
            labels,
        })
    }

    /// Draw logits from `logit_stream` and labels from `label_stream`.
    pub fn sample(
        params: &ModelParams,
        logit_stream: &mut RngStream,
        label_stream: &mut RngStream,
    ) -> Result<Self> {
        let logits = sample_logits(params, logit_stream)?;
        let probs = softmax_probs(logits.view());
        let labels = assign_labels(probs.view(), params.target_accuracy, label_stream)?;
        Ok(LogitEnsemble {
            logits,
            probs,
            labels,
        })
    }

    pub fn n_examples(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.probs.ncols()
    }

    /// Fraction of examples whose label is the row argmax.
    pub fn accuracy(&self) -> f64 {
        let hits = self
            .probs
            .outer_iter()
            .zip(&self.labels)
            .filter(|(row, &l)| argmax(row.as_slice().unwrap()) == l)
            .count();
        hits as f64 / self.n_examples() as f64
    }

    pub fn loss(&self) -> f64 {
        cross_entropy_loss(self.probs.view(), &self.labels)
    }
}

/// `N x C` i.i.d. `Normal(0, sigma_z^2)` logits.
pub fn sample_logits(params: &ModelParams, stream: &mut RngStream) -> Result<Array2<f64>> {
    gaussian_matrix(stream, params.n_examples, params.n_classes, params.sigma_z)
}

/// Max-subtracted softmax of one row.
pub fn softmax_row(z: &[f64], out: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (p, &zk) in out.iter_mut().zip(z) {
        *p = (zk - max).exp();
        total += *p;
    }
    for p in out.iter_mut() {
        *p /= total;
    }
}

/// Row-wise softmax.
pub fn softmax_probs(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut probs = Array2::zeros(logits.raw_dim());
    for (z, mut p) in logits.outer_iter().zip(probs.outer_iter_mut()) {
        let z = z.to_vec();
        softmax_row(&z, p.as_slice_mut().unwrap());
    }
    probs
}

/// Mean cross-entropy `-(1/N) sum log p[mu][label[mu]]`.
///
/// Returns `f64::INFINITY` if any labelled probability has underflowed to
/// exactly zero, i.e. a confidently wrong prediction beyond double range.
pub fn cross_entropy_loss(probs: ArrayView2<f64>, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &l) in probs.outer_iter().zip(labels) {
        let p = row[l];
        if p == 0.0 {
            return f64::INFINITY;
        }
        total -= p.ln();
    }
    total / labels.len() as f64
}

/// `y - p` for one example, using the same sign convention as the weight
/// gradient assembled in [`crate::hessian::weight_gradient`]. This is minus
/// the derivative of the loss with respect to the logits.
pub fn logit_gradient(probs: &[f64], label: usize) -> Array1<f64> {
    let mut g: Array1<f64> = probs.iter().map(|p| -p).collect();
    g[label] += 1.0;
    g
}

/// `p_k (delta_kl - p_l)`: the Hessian of the single-example loss with
/// respect to its logits.
pub fn logit_hessian(probs: &[f64]) -> Array2<f64> {
    let c = probs.len();
    let mut a = Array2::zeros((c, c));
    for k in 0..c {
        for l in 0..c {
            a[[k, l]] = if k == l {
                // 1 - p_k as a sum of the other entries keeps rows summing to
                // zero when p_k is close to one.
                probs[k] * complement(probs, k)
            } else {
                -probs[k] * probs[l]
            };
        }
    }
    a
}

/// `sum_{l != k} p_l`.
pub(crate) fn complement(probs: &[f64], k: usize) -> f64 {
    probs
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != k)
        .map(|(_, p)| p)
        .sum()
}

/// Entropy in bits, with `0 log 0 = 0`.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Assign labels so that exactly `round(target_accuracy * N)` examples are
/// labelled with their argmax class.
///
/// The correctly labelled examples are a uniformly random subset; every
/// other example gets a label drawn uniformly from the `C - 1` classes
/// different from its argmax.
pub fn assign_labels(
    probs: ArrayView2<f64>,
    target_accuracy: f64,
    stream: &mut RngStream,
) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&target_accuracy) {
        return Err(Error::param(
            "target_accuracy",
            format!("must lie in [0, 1], got {target_accuracy}"),
        ));
    }
    let (n, c) = probs.dim();
    let argmaxes: Vec<usize> = probs
        .outer_iter()
        .map(|row| argmax(&row.to_vec()))
        .collect();
    let n_correct = (target_accuracy * n as f64).round() as usize;

    let mut order: Vec<usize> = (0..n).collect();
    stream.shuffle(&mut order);

    let mut labels = argmaxes.clone();
    for &mu in &order[n_correct..] {
        let r = stream.below(c - 1);
        labels[mu] = if r < argmaxes[mu] { r } else { r + 1 };
    }
    Ok(labels)
}

/// Example-averaged entropy and top probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FreezingStats {
    /// Bits.
    pub mean_entropy: f64,
    pub mean_max_prob: f64,
}

pub fn freezing_stats(probs: ArrayView2<f64>) -> FreezingStats {
    let n = probs.nrows() as f64;
    let mut entropy = 0.0;
    let mut max_prob = 0.0;
    for row in probs.axis_iter(Axis(0)) {
        let row = row.to_vec();
        entropy += shannon_entropy(&row);
        max_prob += row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    FreezingStats {
        mean_entropy: entropy / n,
        mean_max_prob: max_prob / n,
    }
}
