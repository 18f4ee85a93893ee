//! Weight-space gradient and Gauss-Newton (G-term) Hessian of the random
//! model.
//!
//! The logit gradient of example `mu`, logit `k` is `c_k + E[mu][k]`: a class
//! mean plus an example-specific residual. The Hessian is assembled from the
//! identity
//!
//! ```text
//! J^T (diag(p) - p p^T) J = sum_k p_k (J_k - Jbar)(J_k - Jbar)^T,   Jbar = J^T p
//! ```
//!
//! so `H = X X^T` where `X` stacks the `N*C` columns
//! `sqrt(p_k / N) * sum_l p_l (J_k - J_l)`. Every term is positive
//! semidefinite and nothing cancels when probabilities freeze onto one class.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};
use ndarray::linalg::general_mat_mul;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::logits::{complement, LogitEnsemble};
use crate::params::ModelParams;
use crate::rng::{gaussian_matrix, gaussian_tensor, RngStream};

/// Mean logit gradients and per-example residuals.
#[derive(Clone, Debug)]
pub struct LogitGradientSet {
    /// `C x D`, row `k` is the mean gradient of logit `k`.
    pub means: Array2<f64>,
    /// `N x C x D`.
    pub residuals: Array3<f64>,
}

impl LogitGradientSet {
    pub fn new(means: Array2<f64>, residuals: Array3<f64>) -> Result<Self> {
        let (c, d) = means.dim();
        let (_, rc, rd) = residuals.dim();
        if (rc, rd) != (c, d) {
            return Err(Error::Shape(format!(
                "means are {c}x{d} but residuals are ?x{rc}x{rd}"
            )));
        }
        Ok(LogitGradientSet { means, residuals })
    }

    pub fn sample(
        params: &ModelParams,
        mean_stream: &mut RngStream,
        residual_stream: &mut RngStream,
    ) -> Result<Self> {
        let means = sample_mean_logit_gradients(params, mean_stream)?;
        let residuals = sample_residuals(params, residual_stream)?;
        Ok(LogitGradientSet { means, residuals })
    }

    pub fn dim(&self) -> (usize, usize, usize) {
        self.residuals.dim()
    }

    /// Dense `N x C x D` tensor of full logit gradients `c_k + E[mu][k]`.
    pub fn composed(&self) -> Array3<f64> {
        let mut out = self.residuals.clone();
        for mut block in out.outer_iter_mut() {
            block += &self.means;
        }
        out
    }

    /// All logit gradients multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        LogitGradientSet {
            means: &self.means * s,
            residuals: &self.residuals * s,
        }
    }

    fn residuals_vanish(&self) -> bool {
        self.residuals.iter().all(|&x| x == 0.0)
    }

    fn check_against(&self, ensemble: &LogitEnsemble) -> Result<()> {
        let (n, c, _) = self.dim();
        if ensemble.probs.dim() != (n, c) {
            return Err(Error::Shape(format!(
                "gradients are for {n} examples x {c} logits, ensemble is {:?}",
                ensemble.probs.dim()
            )));
        }
        Ok(())
    }
}

/// `P_kl = (1/N) sum_mu p_k (delta_kl - p_l)`.
#[derive(Clone, Debug)]
pub struct ClassCouplingMatrix(pub Array2<f64>);

/// Dense symmetric `D x D` Hessian.
#[derive(Clone, Debug)]
pub struct HessianMatrix(pub Array2<f64>);

impl HessianMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn trace(&self) -> f64 {
        self.0.diag().sum()
    }
}

/// Weight-space gradient, length `D`.
#[derive(Clone, Debug)]
pub struct WeightGradient(pub Array1<f64>);

impl WeightGradient {
    pub fn norm(&self) -> f64 {
        self.0.dot(&self.0).sqrt()
    }
}

/// Mean logit gradients: row `k` holds i.i.d. `Normal(0, sigma_c^2)` entries
/// times the class length multiplier.
pub fn sample_mean_logit_gradients(
    params: &ModelParams,
    stream: &mut RngStream,
) -> Result<Array2<f64>> {
    let mut means = gaussian_matrix(stream, params.n_classes, params.n_weights, params.sigma_c)?;
    if params.length_beta != 0.0 {
        for (k, mut row) in means.outer_iter_mut().enumerate() {
            row *= params.length_multiplier(k);
        }
    }
    Ok(means)
}

/// `N x C x D` residuals with i.i.d. `Normal(0, sigma_e^2)` entries.
pub fn sample_residuals(params: &ModelParams, stream: &mut RngStream) -> Result<Array3<f64>> {
    gaussian_tensor(
        stream,
        (params.n_examples, params.n_classes, params.n_weights),
        params.sigma_e,
    )
}

/// `g = (1/N) sum_mu sum_k (y_k - p_k)(c_k + E[mu][k])`.
pub fn weight_gradient(set: &LogitGradientSet, ensemble: &LogitEnsemble) -> Result<WeightGradient> {
    set.check_against(ensemble)?;
    let (n, c, d) = set.dim();
    let mut class_weight = vec![0.0; c];
    let mut g = Array1::zeros(d);
    for mu in 0..n {
        let p = ensemble.probs.row(mu);
        let label = ensemble.labels[mu];
        let block = set.residuals.index_axis(Axis(0), mu);
        for k in 0..c {
            let r = if k == label { 1.0 - p[k] } else { -p[k] };
            class_weight[k] += r;
            g.scaled_add(r, &block.row(k));
        }
    }
    for (k, w) in class_weight.into_iter().enumerate() {
        g.scaled_add(w, &set.means.row(k));
    }
    g /= n as f64;
    Ok(WeightGradient(g))
}

/// Example-averaged logit Hessian.
pub fn class_coupling_matrix(probs: ArrayView2<f64>) -> ClassCouplingMatrix {
    let (n, c) = probs.dim();
    let mut out = Array2::zeros((c, c));
    for row in probs.outer_iter() {
        let p = row.to_vec();
        for k in 0..c {
            out[[k, k]] += p[k] * complement(&p, k);
            for l in 0..c {
                if l != k {
                    out[[k, l]] -= p[k] * p[l];
                }
            }
        }
    }
    out /= n as f64;
    ClassCouplingMatrix(out)
}

/// Controls for dense Hessian assembly.
#[derive(Clone, Copy, Debug)]
pub struct AssemblyOptions {
    pub exec: Exec,
    /// Upper bound on the bytes held by the Hessian and its factor.
    pub memory_budget: u64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            exec: Exec::default(),
            memory_budget: 2 << 30,
        }
    }
}

impl AssemblyOptions {
    pub fn with_exec(exec: Exec) -> Self {
        AssemblyOptions {
            exec,
            ..Self::default()
        }
    }
}

/// Exact G-term Hessian `(1/N) sum_mu J_mu^T A_mu J_mu`.
///
/// When every residual is zero the rank-`C` factored form `c^T P c` is used
/// instead, which is also what [`clustered_hessian`] returns as its signal
/// term.
pub fn model_hessian(set: &LogitGradientSet, ensemble: &LogitEnsemble) -> Result<HessianMatrix> {
    model_hessian_with(set, ensemble, &AssemblyOptions::default())
}

pub fn model_hessian_with(
    set: &LogitGradientSet,
    ensemble: &LogitEnsemble,
    opts: &AssemblyOptions,
) -> Result<HessianMatrix> {
    set.check_against(ensemble)?;
    if set.residuals_vanish() {
        let coupling = class_coupling_matrix(ensemble.probs.view());
        return Ok(signal_hessian(set.means.view(), &coupling));
    }
    gauss_newton(ensemble.probs.view(), opts, set.dim(), |mu, k, out| {
        let e = set.residuals.slice(s![mu, k, ..]);
        let m = set.means.row(k);
        for ((o, &a), &b) in out.iter_mut().zip(m.iter()).zip(e.iter()) {
            *o = a + b;
        }
    })
}

/// Signal and noise parts of the Hessian with the mean/residual cross terms
/// dropped: `signal = c^T P c` and `noise = (1/N) sum_mu E_mu^T A_mu E_mu`.
pub fn clustered_hessian(
    set: &LogitGradientSet,
    ensemble: &LogitEnsemble,
) -> Result<(HessianMatrix, HessianMatrix)> {
    clustered_hessian_with(set, ensemble, &AssemblyOptions::default())
}

pub fn clustered_hessian_with(
    set: &LogitGradientSet,
    ensemble: &LogitEnsemble,
    opts: &AssemblyOptions,
) -> Result<(HessianMatrix, HessianMatrix)> {
    set.check_against(ensemble)?;
    let coupling = class_coupling_matrix(ensemble.probs.view());
    let signal = signal_hessian(set.means.view(), &coupling);
    let noise = if set.residuals_vanish() {
        let d = set.means.ncols();
        HessianMatrix(Array2::zeros((d, d)))
    } else {
        gauss_newton(ensemble.probs.view(), opts, set.dim(), |mu, k, out| {
            out.assign(&set.residuals.slice(s![mu, k, ..]));
        })?
    };
    Ok((signal, noise))
}

/// `means^T P means`, symmetrized.
fn signal_hessian(means: ArrayView2<f64>, coupling: &ClassCouplingMatrix) -> HessianMatrix {
    let d = means.ncols();
    let pc = coupling.0.dot(&means);
    let mut h = Array2::zeros((d, d));
    general_mat_mul(1.0, &means.t(), &pc, 0.0, &mut h);
    symmetrize(&mut h);
    HessianMatrix(h)
}

/// Rows of `H` computed per panel task.
const PANEL_ROWS: usize = 64;

/// `(1/N) sum_mu J_mu^T A_mu J_mu` for logit gradients supplied by `fill`,
/// which writes `J_mu[k]` into its output row.
fn gauss_newton<F>(
    probs: ArrayView2<f64>,
    opts: &AssemblyOptions,
    (n, c, d): (usize, usize, usize),
    fill: F,
) -> Result<HessianMatrix>
where
    F: Fn(usize, usize, &mut ndarray::ArrayViewMut1<f64>),
{
    let needed = 8 * (d as u64 * d as u64 + (n * c) as u64 * d as u64);
    if needed > opts.memory_budget {
        return Err(Error::MemoryBudget {
            needed,
            budget: opts.memory_budget,
        });
    }

    // Factor rows, example-major: row (mu, k) = sqrt(p_k/N) sum_l p_l (J_k - J_l).
    let mut factor = Array2::<f64>::zeros((n * c, d));
    let mut block = Array2::<f64>::zeros((c, d));
    let inv_n = 1.0 / n as f64;
    for mu in 0..n {
        for k in 0..c {
            fill(mu, k, &mut block.row_mut(k));
        }
        let p = probs.row(mu);
        for k in 0..c {
            let weight = (p[k] * inv_n).sqrt();
            if weight == 0.0 {
                continue;
            }
            let mut row = factor.row_mut(mu * c + k);
            let jk = block.row(k);
            for l in 0..c {
                if l == k || p[l] == 0.0 {
                    continue;
                }
                let jl = block.row(l);
                let pl = p[l];
                for ((r, &a), &b) in row.iter_mut().zip(jk.iter()).zip(jl.iter()) {
                    *r += pl * (a - b);
                }
            }
            row *= weight;
        }
    }

    // H[rows] = factor[:, rows]^T factor, one task per row panel.
    let panels = d.div_ceil(PANEL_ROWS);
    let factor = &factor;
    let parts = opts.exec.map(panels, |i| {
        let lo = i * PANEL_ROWS;
        let hi = (lo + PANEL_ROWS).min(d);
        let mut part = Array2::zeros((hi - lo, d));
        general_mat_mul(1.0, &factor.slice(s![.., lo..hi]).t(), factor, 0.0, &mut part);
        part
    });
    let mut h = Array2::zeros((d, d));
    for (i, part) in parts.into_iter().enumerate() {
        let lo = i * PANEL_ROWS;
        h.slice_mut(s![lo..lo + part.nrows(), ..]).assign(&part);
    }
    symmetrize(&mut h);
    Ok(HessianMatrix(h))
}

pub(crate) fn symmetrize(h: &mut Array2<f64>) {
    let n = h.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (h[[i, j]] + h[[j, i]]);
            h[[i, j]] = m;
            h[[j, i]] = m;
        }
    }
}
