//! Logit-gradient dumps: the `LGRD` binary format and a CSV alternative.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! b"LGRD"  u32 version = 1  u32 N  u32 C  u32 D
//! N*C*D f64 gradients, example-major, then logit, then weight
//! N i32 labels
//! ```
//!
//! The CSV form has one headerless row of `D` values per `(example, logit)`
//! pair in the same order, with the labels one per line in a sidecar file
//! next to it (`grads.csv` pairs with `grads.labels`).

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use thiserror::Error;

use crate::hessian::LogitGradientSet;

pub const MAGIC: [u8; 4] = *b"LGRD";
pub const VERSION: u32 = 1;
const HEADER_BYTES: usize = 20;

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {found:?}: expected \"LGRD\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported dump version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("truncated dump: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("dump has trailing data: expected {expected} bytes, found {actual}")]
    TrailingBytes { expected: u64, actual: u64 },
    #[error("label {label} of example {index} is outside [0, {n_classes})")]
    LabelOutOfRange {
        index: usize,
        label: i64,
        n_classes: usize,
    },
    #[error("invalid dump shape: {0}")]
    Shape(String),
    #[error("{path}:{line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DumpError + '_ {
    move |source| DumpError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Full logit gradients of `N` examples with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitGradientDump {
    /// `N x C x D`.
    pub grads: Array3<f64>,
    pub labels: Vec<usize>,
}

impl LogitGradientDump {
    pub fn new(grads: Array3<f64>, labels: Vec<usize>) -> Result<Self, DumpError> {
        let (n, c, _) = grads.dim();
        if labels.len() != n {
            return Err(DumpError::Shape(format!(
                "{} labels for {n} examples",
                labels.len()
            )));
        }
        check_labels(labels.iter().map(|&l| l as i64), c)?;
        Ok(LogitGradientDump { grads, labels })
    }

    pub fn from_set(set: &LogitGradientSet, labels: &[usize]) -> Result<Self, DumpError> {
        Self::new(set.composed(), labels.to_vec())
    }
}

fn check_labels(labels: impl Iterator<Item = i64>, c: usize) -> Result<Vec<usize>, DumpError> {
    labels
        .enumerate()
        .map(|(index, label)| {
            if label < 0 || label as u64 >= c as u64 {
                Err(DumpError::LabelOutOfRange {
                    index,
                    label,
                    n_classes: c,
                })
            } else {
                Ok(label as usize)
            }
        })
        .collect()
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Sidecar label file of a CSV dump.
pub fn labels_path(path: &Path) -> PathBuf {
    path.with_extension("labels")
}

/// Read a dump, choosing the CSV reader for `.csv` paths.
pub fn read_dump(path: &Path) -> Result<LogitGradientDump, DumpError> {
    if is_csv(path) {
        read_csv_dump(path, &labels_path(path))
    } else {
        let bytes = fs::read(path).map_err(io_err(path))?;
        decode(&bytes)
    }
}

/// Write a dump, choosing the CSV writer for `.csv` paths.
pub fn write_dump(path: &Path, dump: &LogitGradientDump) -> Result<(), DumpError> {
    if is_csv(path) {
        write_csv_dump(path, &labels_path(path), dump)
    } else {
        fs::write(path, encode(dump)?).map_err(io_err(path))
    }
}

fn dim_u32(name: &str, v: usize) -> Result<u32, DumpError> {
    u32::try_from(v).map_err(|_| DumpError::Shape(format!("{name} = {v} does not fit in u32")))
}

pub fn encode(dump: &LogitGradientDump) -> Result<Vec<u8>, DumpError> {
    let (n, c, d) = dump.grads.dim();
    let mut out = Vec::with_capacity(HEADER_BYTES + 8 * n * c * d + 4 * n);
    out.extend_from_slice(&MAGIC);
    for v in [VERSION, dim_u32("N", n)?, dim_u32("C", c)?, dim_u32("D", d)?] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for x in dump.grads.iter() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for &l in &dump.labels {
        let l = i32::try_from(l).map_err(|_| DumpError::Shape(format!("label {l} exceeds i32")))?;
        out.extend_from_slice(&l.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<LogitGradientDump, DumpError> {
    let actual = bytes.len() as u64;
    if bytes.len() < 4 {
        return Err(DumpError::Truncated {
            expected: HEADER_BYTES as u64,
            actual,
        });
    }
    let found: [u8; 4] = bytes[..4].try_into().unwrap();
    if found != MAGIC {
        return Err(DumpError::BadMagic { found });
    }
    if bytes.len() < HEADER_BYTES {
        return Err(DumpError::Truncated {
            expected: HEADER_BYTES as u64,
            actual,
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    let version = word(1);
    if version != VERSION {
        return Err(DumpError::UnsupportedVersion(version));
    }
    let (n, c, d) = (word(2) as u64, word(3) as u64, word(4) as u64);
    let expected = HEADER_BYTES as u64 + 8 * n * c * d + 4 * n;
    if actual < expected {
        return Err(DumpError::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(DumpError::TrailingBytes { expected, actual });
    }
    let (n, c, d) = (n as usize, c as usize, d as usize);
    let payload = &bytes[HEADER_BYTES..];
    let values: Vec<f64> = payload[..8 * n * c * d]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let labels = check_labels(
        payload[8 * n * c * d..]
            .chunks_exact(4)
            .map(|b| i32::from_le_bytes(b.try_into().unwrap()) as i64),
        c,
    )?;
    let grads = Array3::from_shape_vec((n, c, d), values)
        .map_err(|e| DumpError::Shape(e.to_string()))?;
    Ok(LogitGradientDump { grads, labels })
}

fn csv_err(path: &Path, line: u64, message: impl Into<String>) -> DumpError {
    DumpError::Csv {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn read_csv_dump(path: &Path, labels: &Path) -> Result<LogitGradientDump, DumpError> {
    let label_text = fs::read_to_string(labels).map_err(io_err(labels))?;
    let mut raw_labels = Vec::new();
    for (i, line) in label_text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: i64 = t
            .parse()
            .map_err(|_| csv_err(labels, i as u64 + 1, format!("bad label {t:?}")))?;
        raw_labels.push(v);
    }
    let n = raw_labels.len();
    if n == 0 {
        return Err(DumpError::Shape("label file lists no examples".into()));
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => DumpError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => csv_err(path, 0, format!("{other:?}")),
        })?;
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if *width.get_or_insert(record.len()) != record.len() {
            return Err(csv_err(
                path,
                line,
                format!("{} columns, expected {}", record.len(), width.unwrap()),
            ));
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| csv_err(path, line, format!("bad number {field:?}")))?;
            values.push(v);
        }
        rows += 1;
    }
    let d = width.unwrap_or(0);
    if !rows.is_multiple_of(n) || rows == 0 || d == 0 {
        return Err(DumpError::Shape(format!(
            "{rows} rows of {d} values do not split into {n} examples"
        )));
    }
    let c = rows / n;
    let labels = check_labels(raw_labels.into_iter(), c)?;
    let grads = Array3::from_shape_vec((n, c, d), values)
        .map_err(|e| DumpError::Shape(e.to_string()))?;
    Ok(LogitGradientDump { grads, labels })
}

pub fn write_csv_dump(path: &Path, labels: &Path, dump: &LogitGradientDump) -> Result<(), DumpError> {
    let mut text = String::new();
    for block in dump.grads.outer_iter() {
        for row in block.outer_iter() {
            let fields: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            text.push_str(&fields.join(","));
            text.push('\n');
        }
    }
    fs::write(path, text).map_err(io_err(path))?;
    let label_text: String = dump.labels.iter().map(|l| format!("{l}\n")).collect();
    fs::write(labels, label_text).map_err(io_err(labels))
}
