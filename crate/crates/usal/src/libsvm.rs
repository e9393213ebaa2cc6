//! LIBSVM text format: one sample per line, `label idx:val idx:val ...`
//! with 1-based, strictly increasing indices. Missing indices are zero.
//!
//! Binary files may use the label alphabets {−1, +1}, {0, 1} or {1, 2};
//! the smaller raw label maps to −1. A file that only ever shows the label
//! `1` is read as all +1. Multiclass files use labels `1..=k`.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use usal_core::data::{Dataset, LabelKind};
use usal_core::model::{Label, Sample, Sign};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelFormat {
    BinaryPm1,
    Classes(usize),
}

impl LabelFormat {
    pub fn kind(self) -> LabelKind {
        match self {
            LabelFormat::BinaryPm1 => LabelKind::Binary,
            LabelFormat::Classes(k) => LabelKind::Multiclass(k),
        }
    }
}

pub fn read_libsvm(path: &Path, format: LabelFormat) -> Result<Dataset> {
    read_libsvm_with_dim(path, format, None)
}

/// Reads `path`, densifying to `dim` when given (which must cover every
/// index in the file) or to the largest index seen.
pub fn read_libsvm_with_dim(path: &Path, format: LabelFormat, dim: Option<usize>) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_libsvm(BufReader::new(file), path, format, dim)
}

struct Row {
    line: usize,
    raw_label: i64,
    entries: Vec<(usize, f64)>,
}

/// Parses LIBSVM text from `reader`; `origin` only labels error messages.
pub fn parse_libsvm<R: BufRead>(reader: R, origin: &Path, format: LabelFormat, dim: Option<usize>) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| Error::Parse { path: origin.to_path_buf(), line, message };
    let mut rows = Vec::new();
    let mut max_index = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let mut tokens = line.split_whitespace();
        let Some(label_tok) = tokens.next() else { continue };
        let raw = label_tok
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && v.fract() == 0.0 && v.abs() < 1e15)
            .ok_or_else(|| parse_err(lineno, format!("label '{label_tok}' is not an integer")))?;
        let mut entries = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected idx:val, got '{tok}'")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad feature index '{idx}'")))?;
            if idx == 0 {
                return Err(parse_err(lineno, "feature indices are 1-based".into()));
            }
            if idx <= last {
                return Err(parse_err(lineno, format!("index {idx} is not strictly increasing")));
            }
            let val: f64 = val
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_err(lineno, format!("bad feature value '{val}'")))?;
            last = idx;
            entries.push((idx, val));
        }
        max_index = max_index.max(last);
        rows.push(Row { line: lineno, raw_label: raw as i64, entries });
    }

    let schema = |message: String| Error::Schema { path: origin.to_path_buf(), message };
    if rows.is_empty() {
        return Err(schema("no samples".into()));
    }
    let dim = match dim {
        Some(d) if d < max_index => {
            return Err(schema(format!("feature index {max_index} exceeds the dimension {d}")))
        }
        Some(d) => d,
        None => max_index,
    };
    if dim == 0 {
        return Err(schema("no features in any sample".into()));
    }

    let map_label: Box<dyn Fn(i64) -> Option<Label>> = match format {
        LabelFormat::BinaryPm1 => {
            let seen: BTreeSet<i64> = rows.iter().map(|r| r.raw_label).collect();
            let neg = if seen.iter().all(|l| [-1, 1].contains(l)) {
                -1
            } else if seen.iter().all(|l| [0, 1].contains(l)) {
                0
            } else if seen.iter().all(|l| [1, 2].contains(l)) {
                1
            } else {
                return Err(schema(format!(
                    "binary labels must be one of {{-1,+1}}, {{0,1}} or {{1,2}}; found {seen:?}"
                )));
            };
            Box::new(move |l| Some(Label::Binary(if l == neg { Sign::Neg } else { Sign::Pos })))
        }
        LabelFormat::Classes(k) => {
            Box::new(move |l| (1..=k as i64).contains(&l).then(|| Label::Class((l - 1) as usize)))
        }
    };

    let mut samples = Vec::with_capacity(rows.len());
    for row in rows {
        let label = map_label(row.raw_label)
            .ok_or_else(|| schema(format!("line {}: label {} outside 1..=k", row.line, row.raw_label)))?;
        let mut x = vec![0.0; dim];
        for (idx, v) in row.entries {
            x[idx - 1] = v;
        }
        samples.push(Sample::new(x, Some(label)));
    }
    Ok(Dataset::new(dim, format.kind(), samples)?)
}

/// Writes `dataset` in LIBSVM format. Binary labels are written as `+1` /
/// `-1`, classes as `1..=k`; only non-zero features are emitted, in the
/// shortest text that reads back to the same `f64`.
pub fn write_libsvm<W: Write>(mut out: W, dataset: &Dataset) -> std::io::Result<()> {
    for s in &dataset.samples {
        match s.label {
            Some(Label::Binary(Sign::Pos)) => out.write_all(b"+1")?,
            Some(Label::Binary(Sign::Neg)) => out.write_all(b"-1")?,
            Some(Label::Class(c)) => write!(out, "{}", c + 1)?,
            None => {
                return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, "sample without a label"))
            }
        }
        for (i, v) in s.features.iter().enumerate() {
            if *v != 0.0 {
                write!(out, " {}:{}", i + 1, v)?;
            }
        }
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_libsvm_file(path: &Path, dataset: &Dataset) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_libsvm(std::io::BufWriter::new(file), dataset).map_err(|e| Error::io(path, e))
}
