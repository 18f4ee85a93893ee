use logit_landscape::clustering::{clustering_report, q_sl};
use logit_landscape::experiments::ModelInstance;
use logit_landscape::io::dump::{read_dump, write_dump, DumpError, LogitGradientDump};
use logit_landscape::{Exec, ModelParams};

fn reference_dump() -> LogitGradientDump {
    let inst = ModelInstance::sample(&ModelParams::default(), "dump").unwrap();
    LogitGradientDump::from_set(&inst.grads, &inst.ensemble.labels).unwrap()
}

#[test]
fn reference_ensemble_survives_a_binary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grads.lgrd");
    let dump = reference_dump();
    write_dump(&path, &dump).unwrap();
    assert_eq!(
        std::fs::metadata(&path).unwrap().len(),
        20 + 8 * 300 * 10 * 1000 + 4 * 300
    );
    let back = read_dump(&path).unwrap();
    assert!(back
        .grads
        .iter()
        .zip(dump.grads.iter())
        .all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(back.labels, dump.labels);

    let direct = q_sl(dump.grads.view()).unwrap();
    let ingested = q_sl(back.grads.view()).unwrap();
    assert!((direct - ingested).abs() <= 1e-12);
    assert_eq!(
        clustering_report(dump.grads.view(), &dump.labels, Exec::Sequential).unwrap(),
        clustering_report(back.grads.view(), &back.labels, Exec::Sequential).unwrap()
    );
}

#[test]
fn csv_dump_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grads.csv");
    let mut p = ModelParams::with_weights(30);
    p.n_examples = 12;
    let inst = ModelInstance::sample(&p, "dump").unwrap();
    let dump = LogitGradientDump::from_set(&inst.grads, &inst.ensemble.labels).unwrap();
    write_dump(&path, &dump).unwrap();
    assert_eq!(read_dump(&path).unwrap(), dump);
}

#[test]
fn truncation_reports_both_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grads.lgrd");
    let mut p = ModelParams::with_weights(8);
    p.n_examples = 5;
    p.n_classes = 3;
    p.hyperplane_dim = 2;
    let inst = ModelInstance::sample(&p, "dump").unwrap();
    let dump = LogitGradientDump::from_set(&inst.grads, &inst.ensemble.labels).unwrap();
    write_dump(&path, &dump).unwrap();
    let full = std::fs::read(&path).unwrap();
    std::fs::write(&path, &full[..full.len() - 100]).unwrap();
    match read_dump(&path) {
        Err(DumpError::Truncated { expected, actual }) => {
            assert_eq!(expected, full.len() as u64);
            assert_eq!(actual, full.len() as u64 - 100);
        }
        other => panic!("expected truncation, got {other:?}"),
    }
}

#[test]
fn csv_with_bad_labels_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.csv");
    std::fs::write(&path, "1,2\n3,4\n5,6\n7,8\n").unwrap();
    std::fs::write(dir.path().join("g.labels"), "0\n2\n").unwrap();
    assert!(matches!(
        read_dump(&path),
        Err(DumpError::LabelOutOfRange { index: 1, label: 2, n_classes: 2 })
    ));
    std::fs::write(dir.path().join("g.labels"), "0\n1\n").unwrap();
    let dump = read_dump(&path).unwrap();
    assert_eq!(dump.grads.dim(), (2, 2, 2));
    assert_eq!(dump.grads[[1, 0, 1]], 6.0);
}
