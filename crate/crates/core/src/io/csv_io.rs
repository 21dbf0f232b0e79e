use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::draws::{DrawDiagnostics, DrawMatrix};
use crate::error::{Error, Result};
use crate::glm::Dataset;

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn read_header(reader: &mut csv::Reader<File>, path: &Path) -> Result<Vec<String>> {
    Ok(reader
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect())
}

fn parse_cell(path: &Path, row: usize, column: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        message: format!("'{raw}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row,
            column: column.to_string(),
            message: format!("'{raw}' is not finite"),
        });
    }
    Ok(v)
}

/// Reads every data row as numbers; rows are numbered from 1 after the header.
fn read_numeric(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = open_reader(path)?;
    let header = read_header(&mut reader, path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let row = i + 1;
        if record.len() != header.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row,
                column: "*".into(),
                message: format!("{} fields, header has {}", record.len(), header.len()),
            });
        }
        let values = record
            .iter()
            .zip(&header)
            .map(|(cell, col)| parse_cell(path, row, col, cell))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    Ok((header, rows))
}

/// Loads a dataset CSV: a `y` column, an optional `trials` column and
/// predictors in the order of the remaining columns.
pub fn load_dataset_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let (header, rows) = read_numeric(path)?;
    let y_col = header
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| Error::HeaderMismatch {
            path: path.to_path_buf(),
            expected: "a 'y' column".into(),
            found: header.join(","),
        })?;
    let trials_col = header.iter().position(|h| h == "trials");
    let predictors: Vec<usize> = (0..header.len())
        .filter(|&c| c != y_col && Some(c) != trials_col)
        .collect();
    if predictors.is_empty() {
        return Err(Error::HeaderMismatch {
            path: path.to_path_buf(),
            expected: "at least one predictor column".into(),
            found: header.join(","),
        });
    }
    let y = rows.iter().map(|r| r[y_col]).collect();
    let trials = match trials_col {
        Some(c) => Some(
            rows.iter()
                .enumerate()
                .map(|(i, r)| {
                    let v = r[c];
                    if v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                        Err(Error::Parse {
                            path: path.to_path_buf(),
                            row: i + 1,
                            column: "trials".into(),
                            message: format!("{v} is not a positive integer"),
                        })
                    } else {
                        Ok(v as u32)
                    }
                })
                .collect::<Result<Vec<u32>>>()?,
        ),
        None => None,
    };
    let x = DMatrix::from_fn(rows.len(), predictors.len(), |i, j| rows[i][predictors[j]]);
    let names = predictors.iter().map(|&c| header[c].clone()).collect();
    Dataset::with_names(y, x, trials, names)
}

pub fn save_dataset_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header = vec!["y".to_string()];
    if data.trials.is_some() {
        header.push("trials".into());
    }
    header.extend(data.predictor_names.iter().cloned());
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for i in 0..data.n() {
        let mut rec = vec![data.y[i].to_string()];
        if let Some(t) = &data.trials {
            rec.push(t[i].to_string());
        }
        rec.extend(data.x.row(i).iter().map(f64::to_string));
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes draws with a `param_names` header; values use the shortest
/// representation that parses back to the same `f64`.
pub fn save_draws_csv(draws: &DrawMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(draws.param_names())
        .map_err(|e| Error::csv(path, e))?;
    let m = draws.matrix();
    for t in 0..m.nrows() {
        w.write_record(m.row(t).iter().map(f64::to_string))
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_draws_csv(path: impl AsRef<Path>) -> Result<DrawMatrix> {
    let path = path.as_ref();
    let (header, rows) = read_numeric(path)?;
    let m = DMatrix::from_fn(rows.len(), header.len(), |t, j| rows[t][j]);
    DrawMatrix::new(m, header, DrawDiagnostics::default())
}

/// Like [`load_draws_csv`] but requires the header to equal `expected`.
pub fn load_draws_csv_expecting(path: impl AsRef<Path>, expected: &[String]) -> Result<DrawMatrix> {
    let path = path.as_ref();
    let draws = load_draws_csv(path)?;
    if draws.param_names() != expected {
        return Err(Error::HeaderMismatch {
            path: path.to_path_buf(),
            expected: expected.join(","),
            found: draws.param_names().join(","),
        });
    }
    Ok(draws)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
