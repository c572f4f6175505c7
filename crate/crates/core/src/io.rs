//! CSV dataset files.
//!
//! One sample per line, `,` separated, `.` decimal point, UTF-8. An optional
//! header row is skipped. When a response column is configured (the first
//! column by default) it is split off as `y`; the remaining columns are the
//! spectral channels in wavelength order.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvOptions {
    pub has_header: bool,
    /// Column holding the response; `None` for feature-only files.
    pub response_col: Option<usize>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            has_header: false,
            response_col: Some(0),
        }
    }
}

fn read_rows(path: &Path, has_header: bool) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line() + 1;
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: e.position().map(|p| p.line()).unwrap_or(line),
                    message: e.to_string(),
                })
            }
        }
        let line = record.position().map(|p| p.line()).unwrap_or(line);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("column {}: `{field}` is not a number", col + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != values.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("expected {} fields, found {}", first.len(), values.len()),
                });
            }
        }
        rows.push(values);
    }
    Ok(rows)
}

/// Read a matrix of numbers (no response column).
pub fn read_matrix(path: &Path, has_header: bool) -> Result<Array2<f64>> {
    let rows = read_rows(path, has_header)?;
    let cols = rows.first().map(Vec::len).unwrap_or(0);
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), cols), flat).map_err(|e| Error::Shape(e.to_string()))
}

pub fn read_dataset(path: &Path, opts: CsvOptions) -> Result<Dataset> {
    let all = read_matrix(path, opts.has_header)?;
    let Some(rc) = opts.response_col else {
        return Err(Error::Config(
            "a dataset file needs a response column".into(),
        ));
    };
    if rc >= all.ncols() {
        return Err(Error::Shape(format!(
            "{}: response column {rc} is out of range for {} columns",
            path.display(),
            all.ncols()
        )));
    }
    let y = all.column(rc).to_owned();
    let keep: Vec<usize> = (0..all.ncols()).filter(|&c| c != rc).collect();
    let x = all.select(ndarray::Axis(1), &keep);
    Dataset::new(x, y)
}

/// Read the spectral part of a file. With a response column configured it is
/// dropped; this lets prediction run on the same files used for fitting.
pub fn read_features(path: &Path, opts: CsvOptions) -> Result<Array2<f64>> {
    match opts.response_col {
        Some(_) => read_dataset(path, opts).map(|d| d.into_parts().0),
        None => read_matrix(path, opts.has_header),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn join(values: impl Iterator<Item = f64>) -> String {
    values.map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Write `y` followed by the channels, one sample per line.
pub fn write_dataset(path: &Path, d: &Dataset, header: bool) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    if header {
        let names: Vec<String> = std::iter::once("y".to_string())
            .chain((0..d.n_channels()).map(|j| format!("x{j}")))
            .collect();
        writeln!(w, "{}", names.join(",")).map_err(io)?;
    }
    for (row, y) in d.x().rows().into_iter().zip(d.y().iter()) {
        writeln!(w, "{}", join(std::iter::once(*y).chain(row.iter().copied()))).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_matrix(path: &Path, x: ArrayView2<'_, f64>) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    for row in x.rows() {
        writeln!(w, "{}", join(row.iter().copied())).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One value per line under a header.
pub fn write_vector(path: &Path, header: &str, v: ArrayView1<'_, f64>) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{header}").map_err(io)?;
    for x in v.iter() {
        writeln!(w, "{x}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// A single row of numbers, or a single column, as a vector.
pub fn read_vector(path: &Path, has_header: bool) -> Result<Array1<f64>> {
    let m = read_matrix(path, has_header)?;
    match m.dim() {
        (1, _) => Ok(m.row(0).to_owned()),
        (_, 1) => Ok(m.column(0).to_owned()),
        (r, c) => Err(Error::Shape(format!(
            "{}: expected a single row or column, found {r}x{c}",
            path.display()
        ))),
    }
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = Dataset::new(array![[0.1, 1e-17], [3.0, -2.5]], array![1.0 / 3.0, 7.0]).unwrap();
        for header in [false, true] {
            write_dataset(&path, &d, header).unwrap();
            let back = read_dataset(
                &path,
                CsvOptions {
                    has_header: header,
                    response_col: Some(0),
                },
            )
            .unwrap();
            assert_eq!(back, d);
        }
    }

    #[test]
    fn response_column_elsewhere() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "1,2,9\n3,4,8\n").unwrap();
        let d = read_dataset(
            &path,
            CsvOptions {
                has_header: false,
                response_col: Some(2),
            },
        )
        .unwrap();
        assert_eq!(d.y(), &array![9.0, 8.0]);
        assert_eq!(d.x(), &array![[1.0, 2.0], [3.0, 4.0]]);
    }

    #[test]
    fn parse_error_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1,2\n3,oops\n").unwrap();
        match read_matrix(&path, false) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("oops"));
            }
            other => panic!("{other:?}"),
        }
        std::fs::write(&path, "a,b\n1,2\n3,4,5\n").unwrap();
        match read_matrix(&path, true) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_matrix(Path::new("/nonexistent/file.csv"), false).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn vectors_as_row_or_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        std::fs::write(&path, "1,2,3\n").unwrap();
        assert_eq!(read_vector(&path, false).unwrap(), array![1.0, 2.0, 3.0]);
        write_vector(&path, "s", array![4.0, 5.0].view()).unwrap();
        assert_eq!(read_vector(&path, true).unwrap(), array![4.0, 5.0]);
    }
}
