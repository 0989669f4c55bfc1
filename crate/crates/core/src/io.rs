//! Plain-text matrix, vector and trace files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::solver::IterRecord;

pub const TRACE_HEADER: [&str; 6] = ["k", "F", "gamma", "eta", "step_norm", "time_s"];

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad number {s:?}")))
}

/// Reads a headerless comma-separated matrix.
pub fn read_matrix<R: Read>(reader: R) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(Error::Parse(format!(
                    "line {}: expected {c} fields, found {}",
                    i + 1,
                    rec.len()
                )))
            }
            _ => {}
        }
        for field in rec.iter() {
            data.push(parse_f64(field, i + 1)?);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    Ok(Array2::from_shape_vec((rows, cols), data).expect("rectangular by construction"))
}

/// Reads a vector stored either one value per line or as a single row.
pub fn read_vector<R: Read>(reader: R) -> Result<Array1<f64>> {
    let m = read_matrix(reader)?;
    if m.ncols() == 1 || m.nrows() == 1 {
        Ok(Array1::from_iter(m.iter().copied()))
    } else {
        Err(Error::Parse(format!(
            "expected a vector, found a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn write_matrix<W: Write>(writer: W, m: &Array2<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in m.rows() {
        w.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// One value per line.
pub fn write_vector<W: Write>(writer: W, v: &Array1<f64>) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for x in v {
        writeln!(w, "{x:e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_file(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    read_matrix(BufReader::new(File::open(path)?))
}

pub fn read_vector_file(path: impl AsRef<Path>) -> Result<Array1<f64>> {
    read_vector(BufReader::new(File::open(path)?))
}

pub fn write_matrix_file(path: impl AsRef<Path>, m: &Array2<f64>) -> Result<()> {
    write_matrix(File::create(path)?, m)
}

pub fn write_vector_file(path: impl AsRef<Path>, v: &Array1<f64>) -> Result<()> {
    write_vector(File::create(path)?, v)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

/// Trace rows with columns `k, F, gamma, eta, step_norm, time_s`. Missing
/// `gamma`/`eta` are written as empty fields.
pub fn write_trace<W: Write>(writer: W, records: &[IterRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record([
            r.k.to_string(),
            format!("{:e}", r.objective),
            opt(r.gamma),
            opt(r.eta),
            format!("{:e}", r.step_norm),
            format!("{:e}", r.time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(reader: R) -> Result<Vec<IterRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if headers != TRACE_HEADER {
        return Err(Error::Parse(format!("unexpected trace header {headers:?}")));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let optional = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                parse_f64(s, line).map(Some)
            }
        };
        out.push(IterRecord {
            k: rec[0]
                .parse()
                .map_err(|_| Error::Parse(format!("line {line}: bad iteration index")))?,
            objective: parse_f64(&rec[1], line)?,
            gamma: optional(&rec[2])?,
            eta: optional(&rec[3])?,
            step_norm: parse_f64(&rec[4], line)?,
            time_s: parse_f64(&rec[5], line)?,
        });
    }
    Ok(out)
}

pub fn write_trace_file(path: impl AsRef<Path>, records: &[IterRecord]) -> Result<()> {
    write_trace(File::create(path)?, records)
}

pub fn read_trace_file(path: impl AsRef<Path>) -> Result<Vec<IterRecord>> {
    read_trace(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn matrix_round_trip() {
        let m = array![[1.0, -2.5, 1e-300], [0.1, 3.0, f64::MAX]];
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        assert_eq!(read_matrix(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn vector_layouts() {
        assert_eq!(
            read_vector("1\n2\n3\n".as_bytes()).unwrap(),
            array![1.0, 2.0, 3.0]
        );
        assert_eq!(
            read_vector("1, 2, 3\n".as_bytes()).unwrap(),
            array![1.0, 2.0, 3.0]
        );
        assert!(read_vector("1,2\n3,4\n".as_bytes()).is_err());
        assert!(read_matrix("1,2\n3\n".as_bytes()).is_err());
        assert!(read_matrix("1,x\n".as_bytes()).is_err());
        let v = array![0.1, -7.25];
        let mut buf = Vec::new();
        write_vector(&mut buf, &v).unwrap();
        assert_eq!(read_vector(buf.as_slice()).unwrap(), v);
    }

    #[test]
    fn trace_round_trip() {
        let recs = vec![
            IterRecord {
                k: 0,
                objective: 3.5,
                gamma: None,
                eta: None,
                step_norm: 0.0,
                time_s: 0.0,
            },
            IterRecord {
                k: 1,
                objective: 1.25,
                gamma: Some(0.5),
                eta: Some(2.0),
                step_norm: 0.3,
                time_s: 1e-4,
            },
        ];
        let mut buf = Vec::new();
        write_trace(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k,F,gamma,eta,step_norm,time_s\n"));
        assert_eq!(read_trace(buf.as_slice()).unwrap(), recs);
    }
}
