//! Ordered one-step-ahead series and their CSV form.
//!
//! CSV schema (header required):
//!
//! ```text
//! step,set_point,feat_0,...,feat_{z-1},target,valid
//! ```
//!
//! Floats are written with 17 significant digits so a write/read cycle is
//! lossless; `valid` is `1` or `0` (`true`/`false` are accepted on read).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{check_finite, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub step: u64,
    pub set_point: u64,
    pub features: Vec<f64>,
    /// Value observed one step after `features`.
    pub target: f64,
    pub valid: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeriesDataset {
    z: usize,
    records: Vec<Record>,
}

impl SeriesDataset {
    pub fn new(z: usize) -> Self {
        Self { z, records: Vec::new() }
    }

    pub fn from_records(z: usize, records: Vec<Record>) -> Result<Self> {
        let mut ds = Self::new(z);
        for r in records {
            ds.push(r)?;
        }
        Ok(ds)
    }

    /// Appends a record, enforcing arity and strictly increasing steps.
    pub fn push(&mut self, record: Record) -> Result<()> {
        if record.features.len() != self.z {
            return Err(Error::DimensionMismatch { expected: self.z, actual: record.features.len() });
        }
        if let Some(last) = self.records.last() {
            if record.step <= last.step {
                return Err(Error::arg(format!(
                    "step indices must increase (step {} follows {})",
                    record.step, last.step
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn z(&self) -> usize {
        self.z
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn valid_count(&self) -> usize {
        self.records.iter().filter(|r| r.valid).count()
    }

    /// Number of positions where the set point differs from the previous row.
    pub fn set_point_changes(&self) -> usize {
        self.records.windows(2).filter(|w| w[0].set_point != w[1].set_point).count()
    }

    /// Keeps the records at the given (ascending, unique) indices.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            z: self.z,
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Features and targets of the valid rows as an `n × z` matrix and a vector.
    pub fn valid_xy(&self) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let valid: Vec<&Record> = self.records.iter().filter(|r| r.valid).collect();
        let mut x = DMatrix::zeros(valid.len(), self.z);
        let mut t = Vec::with_capacity(valid.len());
        for (k, r) in valid.iter().enumerate() {
            check_finite(&r.features, "dataset features")?;
            check_finite(&[r.target], "dataset target")?;
            for (j, v) in r.features.iter().enumerate() {
                x[(k, j)] = *v;
            }
            t.push(r.target);
        }
        Ok((x, t))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BufWriter::new(writer);
        write!(w, "step,set_point")?;
        for j in 0..self.z {
            write!(w, ",feat_{j}")?;
        }
        writeln!(w, ",target,valid")?;
        for r in &self.records {
            write!(w, "{},{}", r.step, r.set_point)?;
            for v in &r.features {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w, ",{:.16e},{}", r.target, u8::from(r.valid))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(File::create(path)?)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_error(1, e))?.clone();
        let z = check_header(&headers)?;
        let mut ds = Self::new(z);
        for result in rdr.records() {
            let rec = result.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                csv_error(line, e)
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |message: String| Error::Csv { line, message };
            if rec.len() != z + 4 {
                return Err(bad(format!("expected {} fields, found {}", z + 4, rec.len())));
            }
            let step = rec[0].trim().parse::<u64>().map_err(|e| bad(format!("step: {e}")))?;
            let set_point = rec[1].trim().parse::<u64>().map_err(|e| bad(format!("set_point: {e}")))?;
            let mut features = Vec::with_capacity(z);
            for j in 0..z {
                let v = rec[2 + j].trim().parse::<f64>().map_err(|e| bad(format!("feat_{j}: {e}")))?;
                features.push(v);
            }
            let target = rec[2 + z].trim().parse::<f64>().map_err(|e| bad(format!("target: {e}")))?;
            let valid = match rec[3 + z].trim() {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(bad(format!("valid: expected 0/1, found `{other}`"))),
            };
            ds.push(Record { step, set_point, features, target, valid }).map_err(|e| bad(e.to_string()))?;
        }
        Ok(ds)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(File::open(path)?)
    }
}

fn csv_error(line: u64, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        },
        _ => Error::Csv { line, message: e.to_string() },
    }
}

fn check_header(headers: &csv::StringRecord) -> Result<usize> {
    let bad = |message: String| Error::Csv { line: 1, message };
    let n = headers.len();
    if n < 5 {
        return Err(bad(format!("header has {n} columns; need step,set_point,feat_0..,target,valid")));
    }
    let z = n - 4;
    let expected = std::iter::once("step".to_string())
        .chain(std::iter::once("set_point".to_string()))
        .chain((0..z).map(|j| format!("feat_{j}")))
        .chain(["target".to_string(), "valid".to_string()]);
    for (got, want) in headers.iter().zip(expected) {
        if got.trim() != want {
            return Err(bad(format!("expected column `{want}`, found `{got}`")));
        }
    }
    Ok(z)
}
