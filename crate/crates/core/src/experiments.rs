//! Experiment drivers: spectrum, gradient overlap, logit-scale sweep, SNR
//! sweep, freezing and hyperplane projection.
//!
//! Each task draws from substreams labelled by a tag (for example
//! `sweep-sigmaz/p3/r1`), so results do not depend on how tasks are
//! scheduled or on which other tasks run.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::clustering::{predicted_q_sl, q_sl};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hessian::{model_hessian_with, weight_gradient, AssemblyOptions, HessianMatrix, LogitGradientSet, WeightGradient};
use crate::logits::{freezing_stats, sample_logits, softmax_probs, FreezingStats, LogitEnsemble};
use crate::params::ModelParams;
use crate::rng::substream;
use crate::spectra::{
    detect_outliers, eigh, eigvalsh, gradient_overlaps, project_hessian, random_orthonormal_basis,
    spectral_norm, trace_norm_ratio, GradientOverlaps, OutlierConfig, OutlierReport, SymmetricSpectrum,
};

/// Settings shared by all experiments.
#[derive(Clone, Copy, Debug)]
pub struct ExperimentOptions {
    pub exec: Exec,
    pub outlier_tau: f64,
    /// Candidate window of the outlier detector; `3C` when unset.
    pub outlier_candidates: Option<usize>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            exec: Exec::default(),
            outlier_tau: 2.0,
            outlier_candidates: None,
        }
    }
}

impl ExperimentOptions {
    pub fn with_exec(exec: Exec) -> Self {
        ExperimentOptions {
            exec,
            ..Self::default()
        }
    }

    pub fn outlier_config(&self, n_classes: usize) -> OutlierConfig {
        OutlierConfig {
            max_candidates: self.outlier_candidates.unwrap_or(3 * n_classes),
            tau: self.outlier_tau,
        }
    }

    fn assembly(&self) -> AssemblyOptions {
        AssemblyOptions::with_exec(self.exec)
    }
}

/// One sampled ensemble: logits, labels and logit gradients.
#[derive(Clone, Debug)]
pub struct ModelInstance {
    pub params: ModelParams,
    pub ensemble: LogitEnsemble,
    pub grads: LogitGradientSet,
}

impl ModelInstance {
    /// Sample from the substreams `{tag}/logits`, `{tag}/labels`,
    /// `{tag}/means` and `{tag}/residuals` of `params.seed`.
    pub fn sample(params: &ModelParams, tag: &str) -> Result<Self> {
        params.validate()?;
        let seed = params.seed;
        let ensemble = LogitEnsemble::sample(
            params,
            &mut substream(seed, &format!("{tag}/logits")),
            &mut substream(seed, &format!("{tag}/labels")),
        )?;
        let grads = LogitGradientSet::sample(
            params,
            &mut substream(seed, &format!("{tag}/means")),
            &mut substream(seed, &format!("{tag}/residuals")),
        )?;
        Ok(ModelInstance {
            params: params.clone(),
            ensemble,
            grads,
        })
    }

    pub fn hessian(&self, opts: &ExperimentOptions) -> Result<HessianMatrix> {
        model_hessian_with(&self.grads, &self.ensemble, &opts.assembly())
    }

    pub fn gradient(&self) -> Result<WeightGradient> {
        weight_gradient(&self.grads, &self.ensemble)
    }
}

pub fn run_spectrum_experiment(
    params: &ModelParams,
    opts: &ExperimentOptions,
) -> Result<(SymmetricSpectrum, OutlierReport)> {
    let instance = ModelInstance::sample(params, "spectrum")?;
    let spectrum = eigh(instance.hessian(opts)?.view())?;
    let report = detect_outliers(
        spectrum.eigenvalues.as_slice().unwrap(),
        &opts.outlier_config(params.n_classes),
    );
    Ok((spectrum, report))
}

pub fn run_overlap_experiment(
    params: &ModelParams,
    opts: &ExperimentOptions,
) -> Result<(SymmetricSpectrum, GradientOverlaps)> {
    let instance = ModelInstance::sample(params, "overlap")?;
    let spectrum = eigh(instance.hessian(opts)?.view())?;
    let overlaps = gradient_overlaps(&spectrum, &instance.gradient()?)?;
    Ok((spectrum, overlaps))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScale {
    Log,
    Linear,
}

/// How the residual scale follows the mean-gradient scale in a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaEMode {
    /// `sigma_e` grows with `sigma_c`, holding their ratio fixed.
    Scaled,
    /// `sigma_e` stays at its base value.
    Fixed,
}

/// Grid and growth law of the logit-scale sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub sigma_z_min: f64,
    pub sigma_z_max: f64,
    pub points: usize,
    pub scale: GridScale,
    /// `sigma_c = base * (sigma_z / sigma_z_ref)^gamma`.
    pub gamma: f64,
    pub sigma_z_ref: f64,
    pub repeats: usize,
    pub sigma_e_mode: SigmaEMode,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            sigma_z_min: 1e-3,
            sigma_z_max: 1e2,
            points: 25,
            scale: GridScale::Log,
            gamma: 0.5,
            sigma_z_ref: 15.0,
            repeats: 5,
            sigma_e_mode: SigmaEMode::Scaled,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_z_min.is_finite() && self.sigma_z_max.is_finite()) {
            return Err(Error::param("sigma_z_min", "grid bounds must be finite"));
        }
        if self.sigma_z_min < 0.0 || (self.scale == GridScale::Log && self.sigma_z_min <= 0.0) {
            return Err(Error::param(
                "sigma_z_min",
                format!("must be positive, got {}", self.sigma_z_min),
            ));
        }
        if self.sigma_z_min >= self.sigma_z_max {
            return Err(Error::param(
                "sigma_z_max",
                format!(
                    "must exceed sigma_z_min = {}, got {}",
                    self.sigma_z_min, self.sigma_z_max
                ),
            ));
        }
        if self.points < 2 {
            return Err(Error::param("points", format!("must be at least 2, got {}", self.points)));
        }
        if self.repeats < 1 {
            return Err(Error::param("repeats", "must be at least 1"));
        }
        if !self.gamma.is_finite() {
            return Err(Error::param("gamma", "must be finite"));
        }
        if !(self.sigma_z_ref.is_finite() && self.sigma_z_ref > 0.0) {
            return Err(Error::param(
                "sigma_z_ref",
                format!("must be positive, got {}", self.sigma_z_ref),
            ));
        }
        Ok(())
    }

    /// Grid points, endpoints included exactly.
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi, n) = (self.sigma_z_min, self.sigma_z_max, self.points);
        let mut grid: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                match self.scale {
                    GridScale::Log => (lo.ln() + t * (hi.ln() - lo.ln())).exp(),
                    GridScale::Linear => lo + t * (hi - lo),
                }
            })
            .collect();
        grid[0] = lo;
        grid[n - 1] = hi;
        grid
    }

    /// Parameters at logit scale `sigma_z` under the growth law.
    pub fn params_at(&self, base: &ModelParams, sigma_z: f64) -> ModelParams {
        let growth = (sigma_z / self.sigma_z_ref).powf(self.gamma);
        let mut p = base.clone();
        p.sigma_z = sigma_z;
        p.sigma_c = base.sigma_c * growth;
        p.sigma_e = match self.sigma_e_mode {
            SigmaEMode::Scaled => base.sigma_e * growth,
            SigmaEMode::Fixed => base.sigma_e,
        };
        p
    }
}

/// Statistics of one (grid point, repeat) task of the logit-scale sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub sigma_z: f64,
    pub sigma_c: f64,
    pub top_eigenvalue: f64,
    pub trace: f64,
    pub spectral_norm: f64,
    /// `trace / spectral_norm`; NaN when the norm is zero.
    pub trace_ratio: f64,
    /// Same ratio for the Hessian compressed onto a random hyperplane.
    pub projected_trace_ratio: f64,
    pub mean_entropy: f64,
    pub mean_max_prob: f64,
    pub n_outliers: usize,
    /// NaN when the gradient vanishes.
    pub grad_power_top10: f64,
    pub repeat: usize,
}

fn ratio_or_nan(values: ndarray::ArrayView1<f64>) -> f64 {
    trace_norm_ratio(values).unwrap_or(f64::NAN)
}

/// Sample one instance, build its Hessian and measure every sweep statistic.
pub fn measure_point(
    params: &ModelParams,
    tag: &str,
    repeat: usize,
    opts: &ExperimentOptions,
) -> Result<SweepRecord> {
    let instance = ModelInstance::sample(params, tag)?;
    let h = instance.hessian(opts)?;
    let spectrum = eigh(h.view())?;
    let values = spectrum.eigenvalues.view();
    let report = detect_outliers(values.as_slice().unwrap(), &opts.outlier_config(params.n_classes));

    let basis = random_orthonormal_basis(
        params.n_weights,
        params.hyperplane_dim,
        &mut substream(params.seed, &format!("{tag}/hyperplane")),
    )?;
    let projected = eigvalsh(project_hessian(&h, basis.view())?.view())?;

    let grad_power_top10 = match gradient_overlaps(&spectrum, &instance.gradient()?) {
        Ok(o) => o.power_in_top(10),
        Err(Error::ZeroGradient) => f64::NAN,
        Err(e) => return Err(e),
    };
    let stats = freezing_stats(instance.ensemble.probs.view());
    Ok(SweepRecord {
        sigma_z: params.sigma_z,
        sigma_c: params.sigma_c,
        top_eigenvalue: values[0],
        trace: values.sum(),
        spectral_norm: spectral_norm(values),
        trace_ratio: ratio_or_nan(values),
        projected_trace_ratio: ratio_or_nan(projected.view()),
        mean_entropy: stats.mean_entropy,
        mean_max_prob: stats.mean_max_prob,
        n_outliers: report.n_outliers,
        grad_power_top10,
        repeat,
    })
}

/// Records in grid order, repeats innermost. Labels, logits and gradients
/// are drawn afresh for every (point, repeat).
pub fn run_sigma_z_sweep(
    params: &ModelParams,
    spec: &SweepSpec,
    opts: &ExperimentOptions,
) -> Result<Vec<SweepRecord>> {
    params.validate()?;
    spec.validate()?;
    let grid = spec.grid();
    let inner = ExperimentOptions {
        exec: Exec::Sequential,
        ..*opts
    };
    opts.exec.try_map(grid.len() * spec.repeats, |task| {
        let (i, r) = (task / spec.repeats, task % spec.repeats);
        let p = spec.params_at(params, grid[i]);
        measure_point(&p, &format!("sweep-sigmaz/p{i}/r{r}"), r, &inner)
    })
}

/// Mean and standard deviation (population) of one statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        MeanStd {
            mean,
            std: var.sqrt(),
        }
    }
}

/// Repeat-aggregated statistics of one grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub sigma_z: f64,
    pub sigma_c: f64,
    pub top_eigenvalue: MeanStd,
    pub trace: MeanStd,
    pub spectral_norm: MeanStd,
    pub trace_ratio: MeanStd,
    pub projected_trace_ratio: MeanStd,
    pub mean_entropy: MeanStd,
    pub mean_max_prob: MeanStd,
    pub n_outliers: MeanStd,
    pub grad_power_top10: MeanStd,
    pub repeats: usize,
}

/// Group consecutive records with the same `sigma_z`.
pub fn summarize(records: &[SweepRecord]) -> Vec<SweepSummary> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let mut end = start + 1;
        while end < records.len() && records[end].sigma_z == records[start].sigma_z {
            end += 1;
        }
        let group = &records[start..end];
        let stat = |f: fn(&SweepRecord) -> f64| MeanStd::of(&group.iter().map(f).collect::<Vec<_>>());
        out.push(SweepSummary {
            sigma_z: group[0].sigma_z,
            sigma_c: group[0].sigma_c,
            top_eigenvalue: stat(|r| r.top_eigenvalue),
            trace: stat(|r| r.trace),
            spectral_norm: stat(|r| r.spectral_norm),
            trace_ratio: stat(|r| r.trace_ratio),
            projected_trace_ratio: stat(|r| r.projected_trace_ratio),
            mean_entropy: stat(|r| r.mean_entropy),
            mean_max_prob: stat(|r| r.mean_max_prob),
            n_outliers: stat(|r| r.n_outliers as f64),
            grad_power_top10: stat(|r| r.grad_power_top10),
            repeats: group.len(),
        });
        start = end;
    }
    out
}

pub const DEFAULT_SNR_GRID: [f64; 5] = [10.0, 2.04, 0.5, 0.1, 0.01];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SnrRecord {
    pub snr: f64,
    pub sigma_e: f64,
    pub n_outliers: usize,
    pub q_sl: f64,
    pub predicted_q_sl: f64,
}

/// Hold `sigma_c` fixed and set `sigma_e = sigma_c / sqrt(snr)` per point.
///
/// Every point reuses the same logits, labels, mean gradients and residual
/// directions; only the residual scale changes between points.
pub fn run_snr_sweep(
    params: &ModelParams,
    snr_grid: &[f64],
    opts: &ExperimentOptions,
) -> Result<Vec<SnrRecord>> {
    params.validate()?;
    if let Some(&bad) = snr_grid.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::param("snr_grid", format!("entries must be positive, got {bad}")));
    }
    let inner = ExperimentOptions {
        exec: Exec::Sequential,
        ..*opts
    };
    opts.exec.try_map(snr_grid.len(), |i| {
        let snr = snr_grid[i];
        let mut p = params.clone();
        p.sigma_e = params.sigma_c / snr.sqrt();
        let instance = ModelInstance::sample(&p, "sweep-snr")?;
        let values = eigvalsh(instance.hessian(&inner)?.view())?;
        let report = detect_outliers(values.as_slice().unwrap(), &inner.outlier_config(p.n_classes));
        Ok(SnrRecord {
            snr,
            sigma_e: p.sigma_e,
            n_outliers: report.n_outliers,
            q_sl: q_sl(instance.grads.composed().view())?,
            predicted_q_sl: predicted_q_sl(p.sigma_c, p.sigma_e)?,
        })
    })
}

/// Most probability rows kept per grid point for simplex plots.
pub const SIMPLEX_ROWS: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreezingRecord {
    pub sigma_z: f64,
    pub stats: FreezingStats,
    /// Probability rows (barycentric coordinates) when `C = 3`, else empty.
    pub simplex_points: Vec<[f64; 3]>,
}

/// Planar coordinates of barycentric `p` on the equilateral triangle with
/// vertices `(0, 0)`, `(1, 0)` and `(1/2, sqrt(3)/2)`.
pub fn simplex_xy(p: &[f64; 3]) -> (f64, f64) {
    (p[1] + 0.5 * p[2], 0.75f64.sqrt() * p[2])
}

pub fn run_freezing_experiment(
    params: &ModelParams,
    sigma_z_grid: &[f64],
    opts: &ExperimentOptions,
) -> Result<Vec<FreezingRecord>> {
    params.validate()?;
    opts.exec.try_map(sigma_z_grid.len(), |i| {
        let mut p = params.clone();
        p.sigma_z = sigma_z_grid[i];
        p.validate()?;
        let logits = sample_logits(&p, &mut substream(p.seed, &format!("freeze/p{i}/logits")))?;
        let probs = softmax_probs(logits.view());
        let simplex_points = if p.n_classes == 3 {
            probs
                .outer_iter()
                .take(SIMPLEX_ROWS)
                .map(|r| [r[0], r[1], r[2]])
                .collect()
        } else {
            Vec::new()
        };
        Ok(FreezingRecord {
            sigma_z: p.sigma_z,
            stats: freezing_stats(probs.view()),
            simplex_points,
        })
    })
}

/// Full and hyperplane-projected spectra of one instance.
#[derive(Clone, Debug, Serialize)]
pub struct ProjectionResult {
    pub hyperplane_dim: usize,
    pub full_eigenvalues: Vec<f64>,
    pub projected_eigenvalues: Vec<f64>,
    pub trace_ratio: f64,
    pub projected_trace_ratio: f64,
    /// Whether `full[i] >= projected[i] >= full[i + D - d]` for every `i`,
    /// with a roundoff allowance.
    pub interlacing_holds: bool,
}

pub fn run_projection_experiment(
    params: &ModelParams,
    opts: &ExperimentOptions,
) -> Result<ProjectionResult> {
    let instance = ModelInstance::sample(params, "project")?;
    let h = instance.hessian(opts)?;
    let full = eigvalsh(h.view())?;
    let basis = random_orthonormal_basis(
        params.n_weights,
        params.hyperplane_dim,
        &mut substream(params.seed, "project/hyperplane"),
    )?;
    let projected = eigvalsh(project_hessian(&h, basis.view())?.view())?;
    Ok(ProjectionResult {
        hyperplane_dim: params.hyperplane_dim,
        trace_ratio: ratio_or_nan(full.view()),
        projected_trace_ratio: ratio_or_nan(projected.view()),
        interlacing_holds: interlaces(&full, &projected),
        full_eigenvalues: full.to_vec(),
        projected_eigenvalues: projected.to_vec(),
    })
}

/// Cauchy interlacing check for descending spectra of `H` and a compression.
pub fn interlaces(full: &Array1<f64>, projected: &Array1<f64>) -> bool {
    let (n, d) = (full.len(), projected.len());
    if d > n {
        return false;
    }
    let tol = 1e-9 * spectral_norm(full.view()).max(f64::MIN_POSITIVE);
    (0..d).all(|i| projected[i] <= full[i] + tol && projected[i] >= full[i + n - d] - tol)
}

/// Scores `x` as ranks `0..n`, averaging ties.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = 0.5 * (i + j) as f64;
        for &o in &order[i..=j] {
            out[o] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson correlation of tie-averaged ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelParams {
        let mut p = ModelParams::with_weights(60);
        p.n_examples = 40;
        p.n_classes = 4;
        p.hyperplane_dim = 5;
        p
    }

    #[test]
    fn grid_endpoints_and_spacing() {
        let spec = SweepSpec::default();
        let g = spec.grid();
        assert_eq!(g.len(), 25);
        assert_eq!((g[0], g[24]), (1e-3, 1e2));
        let step = (g[1] / g[0]).ln();
        assert!(g.windows(2).all(|w| ((w[1] / w[0]).ln() - step).abs() < 1e-12));

        let lin = SweepSpec {
            scale: GridScale::Linear,
            sigma_z_min: 0.0,
            sigma_z_max: 4.0,
            points: 5,
            ..SweepSpec::default()
        };
        assert_eq!(lin.grid(), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn spec_validation() {
        let bad = [
            SweepSpec { points: 1, ..SweepSpec::default() },
            SweepSpec { repeats: 0, ..SweepSpec::default() },
            SweepSpec { sigma_z_min: 5.0, sigma_z_max: 5.0, ..SweepSpec::default() },
            SweepSpec { sigma_z_min: 0.0, ..SweepSpec::default() },
        ];
        for s in bad {
            assert!(s.validate().is_err(), "{s:?}");
        }
        assert!(SweepSpec::default().validate().is_ok());
    }

    #[test]
    fn growth_law_keeps_ratio_in_scaled_mode() {
        let base = ModelParams::default();
        let spec = SweepSpec::default();
        let p = spec.params_at(&base, 60.0);
        assert!((p.sigma_c / base.sigma_c - 2.0).abs() < 1e-12);
        assert!((p.sigma_c / p.sigma_e - base.sigma_c / base.sigma_e).abs() < 1e-12);
        let fixed = SweepSpec { sigma_e_mode: SigmaEMode::Fixed, ..spec };
        assert_eq!(fixed.params_at(&base, 60.0).sigma_e, base.sigma_e);
    }

    #[test]
    fn sweep_is_deterministic_and_schedule_free() {
        let spec = SweepSpec {
            points: 3,
            repeats: 2,
            sigma_z_min: 0.1,
            sigma_z_max: 10.0,
            ..SweepSpec::default()
        };
        let a = run_sigma_z_sweep(&small(), &spec, &ExperimentOptions::with_exec(Exec::Sequential)).unwrap();
        let b = run_sigma_z_sweep(&small(), &spec, &ExperimentOptions::with_exec(Exec::Parallel)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert_eq!((a[0].repeat, a[1].repeat, a[2].repeat), (0, 1, 0));
        for r in &a {
            assert!((r.trace_ratio - r.trace / r.spectral_norm).abs() < 1e-12 * r.trace_ratio.abs());
        }
        let s = summarize(&a);
        assert_eq!(s.len(), 3);
        assert_eq!(s[1].repeats, 2);
        assert!((s[1].top_eigenvalue.mean - 0.5 * (a[2].top_eigenvalue + a[3].top_eigenvalue)).abs() < 1e-18);
    }

    #[test]
    fn no_signal_means_no_outliers() {
        let mut p = small();
        p.sigma_c = 0.0;
        let (_, report) = run_spectrum_experiment(&p, &ExperimentOptions::default()).unwrap();
        assert_eq!(report.n_outliers, 0);
    }

    #[test]
    fn noiseless_gradient_lies_in_signal_subspace() {
        let mut p = small();
        p.sigma_e = 0.0;
        let (_, o) = run_overlap_experiment(&p, &ExperimentOptions::default()).unwrap();
        assert!(o.power_in_top(p.n_classes) > 0.999);
    }

    #[test]
    fn freezing_limits() {
        let mut p = ModelParams::default();
        p.n_examples = 2000;
        let recs = run_freezing_experiment(&p, &[1e-3, 1e2], &ExperimentOptions::default()).unwrap();
        assert!((recs[0].stats.mean_entropy - 10f64.log2()).abs() < 0.02);
        assert!(recs[1].stats.mean_entropy < 0.2);
        assert!(recs[0].simplex_points.is_empty());

        p.n_classes = 3;
        p.n_examples = 800;
        let recs = run_freezing_experiment(&p, &[1.0], &ExperimentOptions::default()).unwrap();
        assert_eq!(recs[0].simplex_points.len(), SIMPLEX_ROWS);
        for q in &recs[0].simplex_points {
            assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn simplex_corners() {
        assert_eq!(simplex_xy(&[1.0, 0.0, 0.0]), (0.0, 0.0));
        assert_eq!(simplex_xy(&[0.0, 1.0, 0.0]), (1.0, 0.0));
        let (x, y) = simplex_xy(&[0.0, 0.0, 1.0]);
        assert!((x - 0.5).abs() < 1e-15 && (y - 0.75f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn projection_interlaces() {
        let r = run_projection_experiment(&small(), &ExperimentOptions::default()).unwrap();
        assert!(r.interlacing_holds);
        assert_eq!(r.projected_eigenvalues.len(), 5);
    }

    #[test]
    fn snr_sweep_reuses_directions() {
        let recs = run_snr_sweep(&small(), &[4.0, 1.0], &ExperimentOptions::default()).unwrap();
        assert!((recs[0].predicted_q_sl - 0.8).abs() < 1e-12);
        assert!((recs[1].sigma_e - small().sigma_c).abs() < 1e-15);
        assert!(run_snr_sweep(&small(), &[0.0], &ExperimentOptions::default()).is_err());
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]) - 0.8).abs() < 1e-12);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![1.5, 0.0, 1.5]);
    }
}
