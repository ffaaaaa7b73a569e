use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, Task};
use crate::error::{Error, Result};
use crate::model::Sample;

/// Reads a headed, comma-separated numeric table from `path`. Columns named in
/// `target_columns` become targets (in the given order); every other column is
/// an input feature, in file order.
pub fn load_csv(path: impl AsRef<Path>, target_columns: &[&str]) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    parse_csv(file, &name, target_columns)
}

/// [`load_csv`] over any reader. Rows in errors are 1-based file lines
/// (the header is line 1); columns are 1-based.
pub fn parse_csv(reader: impl Read, name: &str, target_columns: &[&str]) -> Result<Dataset> {
    if target_columns.is_empty() {
        return Err(Error::Csv {
            row: 1,
            column: 0,
            message: "no target columns requested".into(),
        });
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(1, 0, e))?
        .iter()
        .map(str::to_owned)
        .collect();

    let mut target_idx = Vec::with_capacity(target_columns.len());
    for t in target_columns {
        match header.iter().position(|h| h == t) {
            Some(i) if !target_idx.contains(&i) => target_idx.push(i),
            Some(_) => {
                return Err(Error::Csv {
                    row: 1,
                    column: 0,
                    message: format!("target `{t}` listed twice"),
                })
            }
            None => return Err(Error::MissingColumn((*t).to_owned())),
        }
    }
    let input_idx: Vec<usize> = (0..header.len()).filter(|i| !target_idx.contains(i)).collect();
    if input_idx.is_empty() {
        return Err(Error::Csv {
            row: 1,
            column: 0,
            message: "no input columns left after removing targets".into(),
        });
    }

    let mut samples = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| csv_err(row, 0, e))?;
        if rec.len() != header.len() {
            return Err(Error::Csv {
                row,
                column: rec.len().min(header.len()) + 1,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let cell = |i: usize| -> Result<f64> {
            let raw = &rec[i];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Err(Error::Csv {
                    row,
                    column: i + 1,
                    message: format!("non-finite value `{raw}` in `{}`", header[i]),
                }),
                Err(_) => Err(Error::Csv {
                    row,
                    column: i + 1,
                    message: format!("cannot parse `{raw}` in `{}` as a number", header[i]),
                }),
            }
        };
        let x = input_idx.iter().map(|&i| cell(i)).collect::<Result<Vec<_>>>()?;
        let y = target_idx.iter().map(|&i| cell(i)).collect::<Result<Vec<_>>>()?;
        samples.push(Sample::new(x, y));
    }
    if samples.is_empty() {
        return Err(Error::Csv {
            row: 2,
            column: 0,
            message: "no data rows".into(),
        });
    }
    Ok(Dataset::new(name, Task::Regression, samples))
}

fn csv_err(row: usize, column: usize, e: csv::Error) -> Error {
    let row = e.position().map_or(row, |p| p.line() as usize);
    Error::Csv {
        row,
        column,
        message: e.to_string(),
    }
}

/// Writes `ds` with header `x0..x{d-1},y0..y{d_o-1}`. Values use Rust's
/// shortest round-trip float formatting, so reloading is bit-exact.
pub fn write_csv(ds: &Dataset, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = (0..ds.input_dim)
        .map(|i| format!("x{i}"))
        .chain((0..ds.output_dim).map(|i| format!("y{i}")))
        .collect();
    let wrap = |e: csv::Error| Error::Csv {
        row: 0,
        column: 0,
        message: e.to_string(),
    };
    w.write_record(&header).map_err(wrap)?;
    for s in &ds.samples {
        w.write_record(s.x.iter().chain(&s.y).map(|v| v.to_string())).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
