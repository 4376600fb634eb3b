//! File formats.
//!
//! * Matrix CSV: plain numbers, no header. Rows are features and columns are
//!   samples unless `transpose` is set.
//! * Tensor text: the dimension `d` on the first line, then `d³` numbers
//!   separated by any whitespace, first index slowest.
//! * Trace TSV: `iteration  objective  cumulative_flops  nnz` with a header;
//!   `nnz` is empty where it does not apply.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::manifold::DescentTrace;
use crate::streaming::SampleStream;
use crate::tensor::SymmetricTensor3;
use crate::{Error, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file))
}

fn parse_record(path: &Path, record: &csv::StringRecord) -> Result<Vec<f64>> {
    let line = record.position().map_or(0, |p| p.line());
    record
        .iter()
        .enumerate()
        .map(|(col, field)| {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(path, line, format!("column {}: '{field}' is not a number", col + 1)))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(path, line, format!("column {}: non-finite value", col + 1)))
            }
        })
        .collect()
}

fn next_row(path: &Path, reader: &mut csv::Reader<File>, record: &mut csv::StringRecord) -> Result<Option<(u64, Vec<f64>)>> {
    loop {
        let more = reader.read_record(record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        if !more {
            return Ok(None);
        }
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let line = record.position().map_or(0, |p| p.line());
        return Ok(Some((line, parse_record(path, record)?)));
    }
}

/// Reads a numeric CSV into `A` (`d×n`). With `transpose`, file rows are samples.
pub fn read_matrix_csv(path: &Path, transpose: bool) -> Result<DMatrix<f64>> {
    let mut reader = csv_reader(path)?;
    let mut record = csv::StringRecord::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    while let Some((line, row)) = next_row(path, &mut reader, &mut record)? {
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(path, line, format!("expected {} columns, found {}", first.len(), row.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(parse_err(path, 1, "no data"));
    }
    let (r, c) = (rows.len(), rows[0].len());
    let m = DMatrix::from_fn(r, c, |i, j| rows[i][j]);
    Ok(if transpose { m.transpose() } else { m })
}

/// Number of non-empty data rows in a CSV file.
pub fn count_csv_rows(path: &Path) -> Result<usize> {
    let mut reader = csv_reader(path)?;
    let mut record = csv::StringRecord::new();
    let mut n = 0;
    while next_row(path, &mut reader, &mut record)?.is_some() {
        n += 1;
    }
    Ok(n)
}

/// Streams a samples-as-rows CSV one row at a time.
#[derive(Debug)]
pub struct CsvRowStream {
    path: PathBuf,
    reader: csv::Reader<File>,
    record: csv::StringRecord,
    dim: usize,
    position: usize,
    peeked: Option<Vec<f64>>,
}

impl CsvRowStream {
    /// Opens the file and reads the first row to learn the dimension.
    pub fn open(path: &Path) -> Result<Self> {
        let mut reader = csv_reader(path)?;
        let mut record = csv::StringRecord::new();
        let first = next_row(path, &mut reader, &mut record)?;
        let Some((_, first)) = first else {
            return Err(parse_err(path, 1, "no data"));
        };
        Ok(Self {
            path: path.to_path_buf(),
            reader,
            record,
            dim: first.len(),
            position: 0,
            peeked: Some(first),
        })
    }
}

impl SampleStream for CsvRowStream {
    fn dim(&self) -> usize {
        self.dim
    }

    fn next_sample(&mut self) -> Result<Option<DVector<f64>>> {
        let row = match self.peeked.take() {
            Some(r) => r,
            None => match next_row(&self.path, &mut self.reader, &mut self.record)? {
                Some((line, r)) => {
                    if r.len() != self.dim {
                        return Err(parse_err(&self.path, line, format!("expected {} columns, found {}", self.dim, r.len())));
                    }
                    r
                }
                None => return Ok(None),
            },
        };
        self.position += 1;
        Ok(Some(DVector::from_vec(row)))
    }

    fn position(&self) -> usize {
        self.position
    }

    fn rewind(&mut self) -> Result<()> {
        *self = Self::open(&self.path)?;
        Ok(())
    }
}

/// Reads `d` followed by the `d³` entries (any whitespace, any line breaks).
pub fn read_tensor_file(path: &Path) -> Result<(usize, Vec<f64>)> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut dim: Option<usize> = None;
    let mut values = Vec::new();
    let mut last_line = 0u64;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(io_err(path))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        last_line = line_no;
        let mut tokens = content.split_whitespace();
        if dim.is_none() {
            let tok = tokens.next().expect("non-empty line has a token");
            let d: usize = tok
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("dimension '{tok}' is not a positive integer")))?;
            if d == 0 {
                return Err(parse_err(path, line_no, "dimension must be positive"));
            }
            if tokens.next().is_some() {
                return Err(parse_err(path, line_no, "the first line must hold only the dimension"));
            }
            dim = Some(d);
            continue;
        }
        let expected = dim.map(|d| d * d * d).unwrap_or(0);
        for tok in tokens {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("'{tok}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(path, line_no, format!("non-finite value '{tok}'")));
            }
            if values.len() == expected {
                return Err(parse_err(path, line_no, format!("more than {expected} values")));
            }
            values.push(v);
        }
    }
    let Some(d) = dim else {
        return Err(parse_err(path, 1, "empty tensor file"));
    };
    if values.len() != d * d * d {
        return Err(parse_err(
            path,
            last_line,
            format!("expected {} values for d = {d}, found {}", d * d * d, values.len()),
        ));
    }
    Ok((d, values))
}

/// Writes `d`, then `d²` lines of `d` values.
pub fn write_tensor_file(path: &Path, t: &SymmetricTensor3) -> Result<()> {
    let d = t.dim();
    let mut out = String::new();
    out.push_str(&format!("{d}\n"));
    for row in t.as_slice().chunks(d) {
        out.push_str(&join(row.iter(), " "));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err(path))
}

fn join<'a>(values: impl Iterator<Item = &'a f64>, sep: &str) -> String {
    values.map(|v| format!("{v}")).collect::<Vec<_>>().join(sep)
}

/// Matrix as CSV, one matrix row per line.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in 0..m.nrows() {
        let row: Vec<f64> = m.row(r).iter().copied().collect();
        writeln!(w, "{}", join(row.iter(), ",")).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// One trace row as written to disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: u64,
    pub objective: f64,
    pub cumulative_flops: u64,
    pub nnz: Option<usize>,
}

pub const TRACE_HEADER: &str = "iteration\tobjective\tcumulative_flops\tnnz";

pub fn trace_rows(trace: &DescentTrace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| TraceRow {
            iteration: r.iteration,
            objective: r.objective,
            cumulative_flops: r.flops,
            nnz: r.support,
        })
        .collect()
}

pub fn write_trace_tsv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{TRACE_HEADER}").map_err(io_err(path))?;
    for r in rows {
        let nnz = r.nnz.map(|n| n.to_string()).unwrap_or_default();
        writeln!(w, "{}\t{}\t{}\t{nnz}", r.iteration, r.objective, r.cumulative_flops).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_trace_tsv(path: &Path) -> Result<Vec<TraceRow>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TRACE_HEADER => {}
        _ => return Err(parse_err(path, 1, "missing trace header")),
    }
    lines
        .map(|(idx, line)| {
            let line_no = idx as u64 + 1;
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(parse_err(path, line_no, format!("expected 4 fields, found {}", f.len())));
            }
            let bad = |what: &str| parse_err(path, line_no, format!("bad {what}"));
            Ok(TraceRow {
                iteration: f[0].parse().map_err(|_| bad("iteration"))?,
                objective: f[1].parse().map_err(|_| bad("objective"))?,
                cumulative_flops: f[2].parse().map_err(|_| bad("flop count"))?,
                nnz: if f[3].is_empty() {
                    None
                } else {
                    Some(f[3].parse().map_err(|_| bad("nnz"))?)
                },
            })
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(format!("serializing output: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_and_transpose() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -2.5, 3e-7, 0.1, 0.2, 1.0 / 3.0]);
        write_matrix_csv(&p, &m).unwrap();
        assert_eq!(read_matrix_csv(&p, false).unwrap(), m);
        assert_eq!(read_matrix_csv(&p, true).unwrap(), m.transpose());
        assert_eq!(count_csv_rows(&p).unwrap(), 2);
    }

    #[test]
    fn ragged_csv_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, "1,2\n3,4\n5\n").unwrap();
        match read_matrix_csv(&p, false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "1,2\n3,x\n").unwrap();
        assert!(matches!(read_matrix_csv(&p, false), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = read_matrix_csv(Path::new("/nonexistent/data.csv"), false).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/data.csv"));
    }

    #[test]
    fn row_stream_rewinds() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "1,2,3\n4,5,6\n").unwrap();
        let mut s = CsvRowStream::open(&p).unwrap();
        assert_eq!(s.dim(), 3);
        assert_eq!(s.next_sample().unwrap().unwrap().as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.next_sample().unwrap().unwrap().as_slice(), &[4.0, 5.0, 6.0]);
        assert!(s.next_sample().unwrap().is_none());
        assert_eq!(s.position(), 2);
        s.rewind().unwrap();
        assert_eq!(s.next_sample().unwrap().unwrap()[0], 1.0);
    }

    #[test]
    fn tensor_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.txt");
        let t = SymmetricTensor3::diagonal(&[0.1, 2.0, -3.5]);
        write_tensor_file(&p, &t).unwrap();
        let (d, v) = read_tensor_file(&p).unwrap();
        assert_eq!(d, 3);
        assert_eq!(v, t.as_slice());
    }

    #[test]
    fn malformed_tensor_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.txt");
        std::fs::write(&p, "2\n1 0 0 0\n0 0 0 zz\n").unwrap();
        assert!(matches!(read_tensor_file(&p), Err(Error::Parse { line: 3, .. })));
        std::fs::write(&p, "2\n1 0 0 0\n0 0 0\n").unwrap();
        assert!(matches!(read_tensor_file(&p), Err(Error::Parse { line: 3, .. })));
        std::fs::write(&p, "two\n").unwrap();
        assert!(matches!(read_tensor_file(&p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn trace_parses_back() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.tsv");
        let rows = vec![
            TraceRow { iteration: 0, objective: 1.0 / 3.0, cumulative_flops: 0, nnz: Some(4) },
            TraceRow { iteration: 1, objective: -2.5e-17, cumulative_flops: 1234, nnz: None },
        ];
        write_trace_tsv(&p, &rows).unwrap();
        assert_eq!(read_trace_tsv(&p).unwrap(), rows);
    }
}
