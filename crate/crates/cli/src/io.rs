//! CSV matrix dialect: comma separated, optional header row, `NA` (any case)
//! for missing cells, decimal point numbers.

use std::path::Path;

use macomss::{Mask, Matrix};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct CsvMatrix {
    pub header: Option<Vec<String>>,
    /// Zero where a cell is missing.
    pub values: Matrix<f64>,
    pub observed: Mask,
}

enum Cell {
    Value(f64),
    Missing,
    Bad,
}

fn parse_cell(s: &str) -> Cell {
    if s.eq_ignore_ascii_case("na") {
        return Cell::Missing;
    }
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Cell::Value(x),
        _ => Cell::Bad,
    }
}

/// Parses a matrix. The first row is a header when none of its cells is a
/// number or `NA`. Errors cite 1-based file rows and columns.
pub fn parse_csv_matrix(text: &str) -> CliResult<CsvMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut header = None;
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    let mut width = None;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("malformed CSV: {e}")))?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if k == 0 && record.iter().all(|c| matches!(parse_cell(c), Cell::Bad)) {
            header = Some(record.iter().map(str::to_string).collect::<Vec<_>>());
            width = Some(record.len());
            continue;
        }
        match width {
            Some(w) if w != record.len() => {
                return Err(CliError::Data(format!(
                    "row {line}: expected {w} columns, found {}",
                    record.len()
                )))
            }
            _ => width = Some(record.len()),
        }
        let mut row = Vec::with_capacity(record.len());
        for (j, cell) in record.iter().enumerate() {
            row.push(match parse_cell(cell) {
                Cell::Value(x) => Some(x),
                Cell::Missing => None,
                Cell::Bad => {
                    return Err(CliError::Data(format!(
                        "row {line}, column {}: cannot parse {cell:?} as a number or NA",
                        j + 1
                    )))
                }
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Data("no data rows".into()));
    }
    let cols = width.unwrap_or(0);
    let values = Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j].unwrap_or(0.0));
    let observed = Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j].is_some());
    Ok(CsvMatrix {
        header,
        values,
        observed,
    })
}

pub fn read_csv_matrix(path: &Path) -> CliResult<CsvMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_csv_matrix(&text).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Formats a fully observed matrix, with an optional header row.
pub fn format_csv_matrix(m: &Matrix<f64>, header: Option<&[String]>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h).expect("in-memory write");
    }
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(|x| x.to_string())).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn write_csv_matrix(path: &Path, m: &Matrix<f64>, header: Option<&[String]>) -> CliResult<()> {
    std::fs::write(path, format_csv_matrix(m, header)).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_na_cells() {
        let m = parse_csv_matrix("a,b\n1,NA\nna,2.5\n").unwrap();
        assert_eq!(m.header.as_deref(), Some(&["a".to_string(), "b".to_string()][..]));
        assert_eq!(m.values.shape(), (2, 2));
        assert!(!m.observed[(0, 1)] && !m.observed[(1, 0)]);
        assert_eq!(m.values[(1, 1)], 2.5);
    }

    #[test]
    fn headerless_input() {
        let m = parse_csv_matrix("1,2\n3,4\n").unwrap();
        assert!(m.header.is_none());
        assert_eq!(m.values[(1, 0)], 3.0);
    }

    #[test]
    fn malformed_cell_is_located() {
        let err = parse_csv_matrix("x,y\n1,2\n3,1.2.3\n").unwrap_err().to_string();
        assert!(err.contains("row 3, column 2"), "{err}");
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(parse_csv_matrix("1,2\n3\n").is_err());
    }

    #[test]
    fn round_trip() {
        let m = Matrix::from_rows(&[[1.5, -2.0], [0.1, 3.0]]).unwrap();
        let back = parse_csv_matrix(&format_csv_matrix(&m, None)).unwrap();
        assert_eq!(back.values, m);
    }
}
