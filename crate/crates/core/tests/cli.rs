use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use logit_landscape::cli::SWEEP_HEADER;
use logit_landscape::io::table::read_table;

const SMALL: &str = "\
# small instance for fast end-to-end runs
n_examples = 40
n_weights = 60
n_classes = 4
hyperplane_dim = 5
points = 3
repeats = 2
sigma_z_min = 1e-2
sigma_z_max = 1e1
snr_grid = 4, 0.5
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_logit-landscape"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn setup(extra: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, format!("{SMALL}{extra}")).unwrap();
    (dir, cfg)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn spectrum_writes_csv_and_outlier_summary() {
    let (dir, cfg) = setup("");
    let out = dir.path().join("out");
    let o = run(&["spectrum", "--config", s(&cfg), "--out", s(&out), "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(header(&out.join("spectrum.csv")), "index,eigenvalue");
    let (_, rows) = read_table(&out.join("spectrum.csv")).unwrap();
    assert_eq!(rows.len(), 60);
    assert!(rows.windows(2).all(|w| w[0][1] >= w[1][1]));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("outliers.json")).unwrap()).unwrap();
    assert!(summary["n_outliers"].is_u64());
    let printed: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed["n_outliers"], summary["n_outliers"]);
}

#[test]
fn sweep_csv_has_documented_header_and_is_reproducible() {
    let (dir, cfg) = setup("");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run(&["sweep-sigmaz", "--config", s(&cfg), "--out", s(&a)]).status.code(), Some(0));
    assert_eq!(
        run(&["sweep-sigmaz", "--config", s(&cfg), "--out", s(&b), "--sequential"]).status.code(),
        Some(0)
    );
    assert_eq!(header(&a.join("sweep.csv")), SWEEP_HEADER.join(","));
    assert_eq!(
        header(&a.join("sweep.csv")),
        "sigma_z,sigma_c,top_eigenvalue,trace,spectral_norm,trace_ratio,projected_trace_ratio,\
         mean_entropy,mean_max_prob,n_outliers,grad_power_top10,repeat"
    );
    for f in ["sweep.csv", "sweep_summary.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let (_, rows) = read_table(&a.join("sweep.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0][0], 1e-2);
    assert_eq!(rows[5][0], 1e1);
    let (_, summary) = read_table(&a.join("sweep_summary.csv")).unwrap();
    assert_eq!(summary.len(), 3);
}

#[test]
fn seed_flag_overrides_config() {
    let (dir, cfg) = setup("seed = 7\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    run(&["spectrum", "--config", s(&cfg), "--out", s(&a)]);
    run(&["spectrum", "--config", s(&cfg), "--out", s(&b), "--seed", "8"]);
    run(&["spectrum", "--config", s(&cfg), "--out", s(&c), "--seed", "7"]);
    let read = |p: &Path| fs::read(p.join("spectrum.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
    assert_eq!(read(&a), read(&c));
}

#[test]
fn other_subcommands_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let three = SMALL.replace("n_classes = 4", "n_classes = 3");
    fs::write(&cfg, format!("{three}emit_svg = true\n")).unwrap();
    let out = dir.path().join("out");
    for cmd in ["overlap", "sweep-snr", "freeze", "project"] {
        let o = run(&[cmd, "--config", s(&cfg), "--out", s(&out)]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(header(&out.join("overlap.csv")), "index,eigenvalue,cosine,cumulative_power");
    assert_eq!(header(&out.join("snr.csv")), "snr,sigma_e,n_outliers,q_sl,predicted_q_sl");
    assert_eq!(header(&out.join("freeze.csv")), "sigma_z,mean_entropy,mean_max_prob");
    assert_eq!(header(&out.join("simplex.csv")), "sigma_z,row,p0,p1,p2,x,y");
    assert_eq!(header(&out.join("projection.csv")), "index,eigenvalue");
    let project: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("project.json")).unwrap()).unwrap();
    assert_eq!(project["interlacing_holds"], true);
    assert!(out.join("overlap.svg").exists());
    assert!(out.join("freeze.svg").exists());
    let (_, snr) = read_table(&out.join("snr.csv")).unwrap();
    assert_eq!(snr.len(), 2);
}

#[test]
fn cluster_scores_dumps_it_wrote() {
    let (dir, cfg) = setup("");
    let out = dir.path().join("out");
    for name in ["grads.lgrd", "grads.csv"] {
        let dump = dir.path().join(name);
        let o = run(&["cluster", "--config", s(&cfg), "--out", s(&out), "--write-dump", s(&dump)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let sampled: serde_json::Value =
            serde_json::from_slice(&fs::read(out.join("clustering.json")).unwrap()).unwrap();
        let o = run(&["cluster", "--input", s(&dump), "--out", s(&out)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let ingested: serde_json::Value =
            serde_json::from_slice(&fs::read(out.join("clustering.json")).unwrap()).unwrap();
        for key in ["q_slsc", "q_sl", "q_dl", "per_class_q"] {
            assert_eq!(sampled[key], ingested[key], "{name} {key}");
        }
    }
}

#[test]
fn exit_codes() {
    let (dir, cfg) = setup("");
    let out = dir.path().join("out");

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "sigma_z = -1\n").unwrap();
    let o = run(&["spectrum", "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigma_z"));

    let unknown = dir.path().join("unknown.cfg");
    fs::write(&unknown, "n_examples = 10\nlearning_rate = 3\n").unwrap();
    let o = run(&["spectrum", "--config", s(&unknown), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let missing = dir.path().join("missing.cfg");
    assert_eq!(run(&["spectrum", "--config", s(&missing)]).status.code(), Some(2));

    assert_eq!(run(&["transmogrify"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let o = run(&["cluster", "--input", s(&dir.path().join("none.lgrd")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));

    let dump = dir.path().join("g.lgrd");
    run(&["cluster", "--config", s(&cfg), "--out", s(&out), "--write-dump", s(&dump)]);
    let bytes = fs::read(&dump).unwrap();
    fs::write(&dump, &bytes[..bytes.len() - 5]).unwrap();
    let o = run(&["cluster", "--input", s(&dump), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("truncated") && err.contains(&bytes.len().to_string()), "{err}");

    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run(&["spectrum", "--config", s(&cfg), "--out", s(&blocker.join("sub"))]);
    assert_eq!(o.status.code(), Some(2));
}
