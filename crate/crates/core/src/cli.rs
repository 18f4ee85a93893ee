//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid input (arguments, configuration,
//! malformed dumps, numerical failures), 2 for filesystem errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::clustering::clustering_report;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::experiments::{
    run_freezing_experiment, run_overlap_experiment, run_projection_experiment, run_sigma_z_sweep,
    run_snr_sweep, run_spectrum_experiment, simplex_xy, summarize, ExperimentOptions, GridScale,
    ModelInstance,
};
use crate::io::config::{parse_config, RunConfig};
use crate::io::dump::{labels_path, read_csv_dump, read_dump, write_dump, LogitGradientDump};
use crate::io::svg::{emit_svg, Mark, Plot, Series};
use crate::io::table::{write_table, Cell};
use crate::spectra::{spectral_norm, trace_norm_ratio};

pub const SWEEP_HEADER: [&str; 12] = [
    "sigma_z",
    "sigma_c",
    "top_eigenvalue",
    "trace",
    "spectral_norm",
    "trace_ratio",
    "projected_trace_ratio",
    "mean_entropy",
    "mean_max_prob",
    "n_outliers",
    "grad_power_top10",
    "repeat",
];

#[derive(Debug, Parser)]
#[command(name = "logit-landscape", version, about = "Random-model loss landscape experiments")]
pub struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,
    /// Print a JSON summary on standard output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Run without worker threads.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hessian eigenvalues and outlier count.
    Spectrum,
    /// Overlap of the gradient with Hessian eigenvectors.
    Overlap,
    /// Statistics across a grid of logit scales.
    SweepSigmaz,
    /// Outlier count and clustering across signal-to-noise ratios.
    SweepSnr,
    /// Entropy and top probability across logit scales.
    Freeze,
    /// Clustering statistics of a gradient dump or a sampled ensemble.
    Cluster {
        /// LGRD dump, or `.csv` with a `.labels` sidecar.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        /// Label file for a CSV dump (default: the sidecar next to it).
        #[arg(long, value_name = "PATH")]
        labels: Option<PathBuf>,
        /// Also write the scored gradients as a dump.
        #[arg(long, value_name = "PATH")]
        write_dump: Option<PathBuf>,
    },
    /// Hessian compressed onto a random hyperplane.
    Project,
}

/// Parse `argv` (program name first), run, report, and return the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(summary) => {
            if cli.json {
                use std::io::Write as _;
                let text = serde_json::to_string_pretty(&summary).unwrap_or_default();
                let _ = writeln!(std::io::stdout(), "{text}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.params.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("json values serialize");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn note(path: &Path) {
    eprintln!("wrote {}", path.display());
}

/// Execute the parsed command and return its JSON summary.
pub fn run(cli: &Cli) -> Result<Value> {
    let cfg = load_config(cli)?;
    let opts = ExperimentOptions {
        exec: if cli.sequential { Exec::Sequential } else { Exec::Parallel },
        outlier_tau: cfg.outlier_tau,
        outlier_candidates: cfg.outlier_candidates,
    };
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let params = &cfg.params;

    match &cli.command {
        Command::Spectrum => {
            let (spectrum, report) = run_spectrum_experiment(params, &opts)?;
            let values = spectrum.eigenvalues.view();
            let rows: Vec<Vec<Cell>> = values
                .iter()
                .enumerate()
                .map(|(i, &v)| vec![i.into(), v.into()])
                .collect();
            let csv = out.join("spectrum.csv");
            write_table(&csv, &["index", "eigenvalue"], &rows)?;
            note(&csv);
            let summary = json!({
                "n_outliers": report.n_outliers,
                "bulk_edge": report.bulk_edge,
                "outlier_values": report.outlier_values,
                "top_eigenvalue": values[0],
                "trace": values.sum(),
                "spectral_norm": spectral_norm(values),
                "trace_ratio": trace_norm_ratio(values).ok(),
                "outlier_config": opts.outlier_config(params.n_classes),
                "params": params,
            });
            let path = out.join("outliers.json");
            write_json(&path, &summary)?;
            note(&path);
            if cfg.emit_svg {
                let plot = Plot {
                    title: "Hessian eigenvalues".into(),
                    x_label: "index".into(),
                    y_label: "eigenvalue".into(),
                    log_x: false,
                    series: vec![Series {
                        name: "eigenvalue".into(),
                        points: values.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect(),
                        mark: Mark::Dots,
                    }],
                };
                emit_svg(&plot, &out.join("spectrum.svg"))?;
            }
            Ok(summary)
        }
        Command::Overlap => {
            let (spectrum, overlaps) = run_overlap_experiment(params, &opts)?;
            let rows: Vec<Vec<Cell>> = (0..spectrum.dim())
                .map(|i| {
                    vec![
                        i.into(),
                        spectrum.eigenvalues[i].into(),
                        overlaps.cosines[i].into(),
                        overlaps.cumulative_power[i].into(),
                    ]
                })
                .collect();
            let csv = out.join("overlap.csv");
            write_table(&csv, &["index", "eigenvalue", "cosine", "cumulative_power"], &rows)?;
            note(&csv);
            if cfg.emit_svg {
                let plot = Plot {
                    title: "Cumulative gradient power".into(),
                    x_label: "eigenvector index".into(),
                    y_label: "fraction".into(),
                    log_x: false,
                    series: vec![Series {
                        name: "cumulative power".into(),
                        points: overlaps
                            .cumulative_power
                            .iter()
                            .enumerate()
                            .map(|(i, &v)| (i as f64, v))
                            .collect(),
                        mark: Mark::Line,
                    }],
                };
                emit_svg(&plot, &out.join("overlap.svg"))?;
            }
            Ok(json!({
                "power_top_classes": overlaps.power_in_top(params.n_classes),
                "power_top10": overlaps.power_in_top(10),
                "params": params,
            }))
        }
        Command::SweepSigmaz => {
            let records = run_sigma_z_sweep(params, &cfg.sweep, &opts)?;
            let rows: Vec<Vec<Cell>> = records
                .iter()
                .map(|r| {
                    vec![
                        r.sigma_z.into(),
                        r.sigma_c.into(),
                        r.top_eigenvalue.into(),
                        r.trace.into(),
                        r.spectral_norm.into(),
                        r.trace_ratio.into(),
                        r.projected_trace_ratio.into(),
                        r.mean_entropy.into(),
                        r.mean_max_prob.into(),
                        r.n_outliers.into(),
                        r.grad_power_top10.into(),
                        r.repeat.into(),
                    ]
                })
                .collect();
            let csv = out.join("sweep.csv");
            write_table(&csv, &SWEEP_HEADER, &rows)?;
            note(&csv);

            let summary = summarize(&records);
            let stats = [
                "top_eigenvalue",
                "trace",
                "spectral_norm",
                "trace_ratio",
                "projected_trace_ratio",
                "mean_entropy",
                "mean_max_prob",
                "n_outliers",
                "grad_power_top10",
            ];
            let mut header = vec!["sigma_z".to_string(), "sigma_c".to_string()];
            for s in stats {
                header.push(format!("{s}_mean"));
                header.push(format!("{s}_std"));
            }
            header.push("repeats".into());
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows: Vec<Vec<Cell>> = summary
                .iter()
                .map(|s| {
                    let mut row: Vec<Cell> = vec![s.sigma_z.into(), s.sigma_c.into()];
                    for m in [
                        s.top_eigenvalue,
                        s.trace,
                        s.spectral_norm,
                        s.trace_ratio,
                        s.projected_trace_ratio,
                        s.mean_entropy,
                        s.mean_max_prob,
                        s.n_outliers,
                        s.grad_power_top10,
                    ] {
                        row.push(m.mean.into());
                        row.push(m.std.into());
                    }
                    row.push(s.repeats.into());
                    row
                })
                .collect();
            let path = out.join("sweep_summary.csv");
            write_table(&path, &header, &rows)?;
            note(&path);

            if cfg.emit_svg {
                let series = |name: &str, f: fn(&crate::experiments::SweepSummary) -> f64| {
                    let raw: Vec<(f64, f64)> = summary.iter().map(|s| (s.sigma_z, f(s))).collect();
                    let peak = raw.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
                    let scale = if peak > 0.0 { 1.0 / peak } else { 1.0 };
                    Series {
                        name: format!("{name} (/max)"),
                        points: raw.into_iter().map(|(x, y)| (x, y * scale)).collect(),
                        mark: Mark::Line,
                    }
                };
                let plot = Plot {
                    title: "Sweep over logit scale".into(),
                    x_label: "sigma_z".into(),
                    y_label: "normalized value".into(),
                    log_x: cfg.sweep.scale == GridScale::Log,
                    series: vec![
                        series("top eigenvalue", |s| s.top_eigenvalue.mean),
                        series("trace ratio", |s| s.trace_ratio.mean),
                        series("projected trace ratio", |s| s.projected_trace_ratio.mean),
                        series("mean entropy", |s| s.mean_entropy.mean),
                    ],
                };
                emit_svg(&plot, &out.join("sweep.svg"))?;
            }
            Ok(json!({ "sweep": cfg.sweep, "params": params, "summary": summary }))
        }
        Command::SweepSnr => {
            let records = run_snr_sweep(params, &cfg.snr_grid, &opts)?;
            let rows: Vec<Vec<Cell>> = records
                .iter()
                .map(|r| {
                    vec![
                        r.snr.into(),
                        r.sigma_e.into(),
                        r.n_outliers.into(),
                        r.q_sl.into(),
                        r.predicted_q_sl.into(),
                    ]
                })
                .collect();
            let csv = out.join("snr.csv");
            write_table(&csv, &["snr", "sigma_e", "n_outliers", "q_sl", "predicted_q_sl"], &rows)?;
            note(&csv);
            Ok(json!({ "records": records, "params": params }))
        }
        Command::Freeze => {
            let grid = cfg.sweep.grid();
            let records = run_freezing_experiment(params, &grid, &opts)?;
            let rows: Vec<Vec<Cell>> = records
                .iter()
                .map(|r| {
                    vec![
                        r.sigma_z.into(),
                        r.stats.mean_entropy.into(),
                        r.stats.mean_max_prob.into(),
                    ]
                })
                .collect();
            let csv = out.join("freeze.csv");
            write_table(&csv, &["sigma_z", "mean_entropy", "mean_max_prob"], &rows)?;
            note(&csv);
            if params.n_classes == 3 {
                let mut rows = Vec::new();
                for r in &records {
                    for (i, p) in r.simplex_points.iter().enumerate() {
                        let (x, y) = simplex_xy(p);
                        rows.push(vec![
                            r.sigma_z.into(),
                            i.into(),
                            p[0].into(),
                            p[1].into(),
                            p[2].into(),
                            x.into(),
                            y.into(),
                        ]);
                    }
                }
                let path = out.join("simplex.csv");
                write_table(&path, &["sigma_z", "row", "p0", "p1", "p2", "x", "y"], &rows)?;
                note(&path);
            }
            if cfg.emit_svg {
                let plot = Plot {
                    title: "Freezing".into(),
                    x_label: "sigma_z".into(),
                    y_label: "value".into(),
                    log_x: cfg.sweep.scale == GridScale::Log,
                    series: vec![
                        Series {
                            name: "mean entropy (bits)".into(),
                            points: records.iter().map(|r| (r.sigma_z, r.stats.mean_entropy)).collect(),
                            mark: Mark::Line,
                        },
                        Series {
                            name: "mean max probability".into(),
                            points: records.iter().map(|r| (r.sigma_z, r.stats.mean_max_prob)).collect(),
                            mark: Mark::Line,
                        },
                    ],
                };
                emit_svg(&plot, &out.join("freeze.svg"))?;
            }
            let stats: Vec<Value> = records
                .iter()
                .map(|r| json!({ "sigma_z": r.sigma_z, "mean_entropy": r.stats.mean_entropy, "mean_max_prob": r.stats.mean_max_prob }))
                .collect();
            Ok(json!({ "records": stats, "params": params }))
        }
        Command::Cluster {
            input,
            labels,
            write_dump: dump_out,
        } => {
            let (dump, source) = match input {
                Some(path) => {
                    let dump = match labels {
                        Some(l) => read_csv_dump(path, l)?,
                        None => read_dump(path)?,
                    };
                    (dump, path.display().to_string())
                }
                None => {
                    let instance = ModelInstance::sample(params, "cluster")?;
                    let dump = LogitGradientDump::from_set(&instance.grads, &instance.ensemble.labels)?;
                    (dump, "sampled".to_string())
                }
            };
            if let Some(path) = dump_out {
                write_dump(path, &dump)?;
                note(path);
                if path.extension().is_some_and(|e| e == "csv") {
                    note(&labels_path(path));
                }
            }
            let report = clustering_report(dump.grads.view(), &dump.labels, opts.exec)?;
            let (n, c, d) = dump.grads.dim();
            let mut summary = serde_json::to_value(&report).expect("report serializes");
            summary["source"] = json!(source);
            summary["shape"] = json!({ "n_examples": n, "n_classes": c, "n_weights": d });
            if input.is_none() {
                summary["predicted_q_sl"] =
                    json!(crate::clustering::predicted_q_sl(params.sigma_c, params.sigma_e).ok());
            }
            let path = out.join("clustering.json");
            write_json(&path, &summary)?;
            note(&path);
            Ok(summary)
        }
        Command::Project => {
            let result = run_projection_experiment(params, &opts)?;
            let rows: Vec<Vec<Cell>> = result
                .projected_eigenvalues
                .iter()
                .enumerate()
                .map(|(i, &v)| vec![i.into(), v.into()])
                .collect();
            let csv = out.join("projection.csv");
            write_table(&csv, &["index", "eigenvalue"], &rows)?;
            note(&csv);
            let summary = json!({
                "hyperplane_dim": result.hyperplane_dim,
                "trace_ratio": result.trace_ratio,
                "projected_trace_ratio": result.projected_trace_ratio,
                "interlacing_holds": result.interlacing_holds,
                "projected_eigenvalues": result.projected_eigenvalues,
                "params": params,
            });
            let path = out.join("project.json");
            write_json(&path, &summary)?;
            note(&path);
            Ok(summary)
        }
    }
}
