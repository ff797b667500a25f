//! CSV reading and writing of time series.
//!
//! The format is a header `t,y1,...,yn` followed by one row per period, with
//! `t` increasing by exactly one from row to row. Lines starting with `#` are
//! comments and are skipped on input.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Scientific notation with 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a series from CSV text. `origin` labels the result.
pub fn read_series<R: Read>(reader: R, origin: &str) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_err(csv_line(&e), e.to_string()))?.clone();
    let header_line = rdr.position().line().max(1);
    let cols: Vec<&str> = header.iter().collect();
    if cols.is_empty() || (cols.len() == 1 && cols[0].is_empty()) {
        return Err(parse_err(header_line, "empty series"));
    }
    if cols.len() < 2 || cols[0] != "t" {
        return Err(parse_err(header_line, format!("expected header `t,y1,...`, got `{}`", cols.join(","))));
    }
    for (j, name) in cols[1..].iter().enumerate() {
        if *name != format!("y{}", j + 1) {
            return Err(parse_err(header_line, format!("column {} should be named y{}, got `{name}`", j + 2, j + 1)));
        }
    }
    let dim = cols.len() - 1;

    let mut values = Vec::new();
    let mut prev_t: Option<i64> = None;
    for record in rdr.records() {
        let record = record.map_err(|e| parse_err(csv_line(&e), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != dim + 1 {
            return Err(parse_err(line, format!("expected {} fields, found {}", dim + 1, record.len())));
        }
        let t: i64 = record[0]
            .parse()
            .map_err(|_| parse_err(line, format!("time index `{}` is not an integer", &record[0])))?;
        if let Some(p) = prev_t {
            if t <= p {
                return Err(parse_err(line, format!("time index {t} does not increase (previous {p})")));
            }
            if t != p + 1 {
                return Err(parse_err(line, format!("gap in time index: {p} followed by {t}")));
            }
        }
        prev_t = Some(t);
        for field in record.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("value `{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value `{field}`")));
            }
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(parse_err(header_line, "empty series"));
    }
    TimeSeries::new(values, dim, origin)
}

fn csv_line(e: &csv::Error) -> u64 {
    e.position().map_or(0, |p| p.line())
}

/// Reads a series from a CSV file.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_series(file, &path.display().to_string())
}

/// Writes `series` as CSV with `t` running from 1.
pub fn write_series<W: Write>(writer: W, series: &TimeSeries) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=series.dim()).map(|j| format!("y{j}")));
    w.write_record(&header).map_err(csv_io)?;
    for (t, row) in series.rows().enumerate() {
        let mut rec = vec![(t + 1).to_string()];
        rec.extend(row.iter().map(|&v| format_f64(v)));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<TimeSeries> {
        read_series(text.as_bytes(), "test")
    }

    fn line_of(e: Error) -> u64 {
        match e {
            Error::Parse { line, .. } => line,
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn three_rows() {
        let s = parse("t,y1\n1,0.5\n2,-1.25\n3,2\n").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.values_1d().unwrap(), &[0.5, -1.25, 2.0]);
    }

    #[test]
    fn bivariate_with_comments() {
        let s = parse("# manifest-sha256: abc\nt,y1,y2\n7,1,2\n# note\n8,3,4\n").unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn header_only_is_empty() {
        let e = parse("t,y1\n").unwrap_err();
        assert!(e.to_string().contains("empty series"), "{e}");
        assert!(parse("").unwrap_err().to_string().contains("empty series"));
    }

    #[test]
    fn nan_names_its_line() {
        let e = parse("t,y1\n1,0.5\n2,NaN\n3,1\n").unwrap_err();
        assert!(e.to_string().contains("non-finite"), "{e}");
        assert_eq!(line_of(e), 3);
    }

    #[test]
    fn malformed_rows() {
        assert_eq!(line_of(parse("t,y1\n1,0.5\n2,abc\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("t,y1\n1,0.5\n2,1,3\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("t,y1\n1,0.5\n1.5,1\n").unwrap_err()), 3);
        assert!(parse("time,y1\n1,2\n").is_err());
        assert!(parse("t,x\n1,2\n").is_err());
    }

    #[test]
    fn time_must_step_by_one() {
        let e = parse("t,y1\n1,0\n3,0\n").unwrap_err();
        assert!(e.to_string().contains("gap"), "{e}");
        let e = parse("t,y1\n2,0\n1,0\n").unwrap_err();
        assert!(e.to_string().contains("does not increase"), "{e}");
    }

    #[test]
    fn write_then_read_is_exact() {
        let values = vec![0.1, 1.0 / 3.0, -2.5e-300, 7.0, f64::MAX, -0.0];
        let s = TimeSeries::new(values.clone(), 2, "x").unwrap();
        let mut buf = Vec::new();
        write_series(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,y1,y2\n1,"));
        let back = parse(&text).unwrap();
        for (a, b) in back.as_slice().iter().zip(&values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
