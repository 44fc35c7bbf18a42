//! CSV datasets: a header row, a `label` column, every other column a feature.

use std::io::{Read, Write};
use std::path::Path;

use featcascade_core::{DataError, Dataset};

pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("no `label` column in header")]
    NoLabel,
    #[error("line {line}, column `{column}`: `{value}` is not a number")]
    NotANumber {
        line: u64,
        column: String,
        value: String,
    },
    #[error(transparent)]
    Data(#[from] DataError),
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset, CsvError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let label_at = header
        .iter()
        .position(|h| h == LABEL_COLUMN)
        .ok_or(CsvError::NoLabel)?;

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| CsvError::NotANumber {
                line,
                column: header[i].clone(),
                value: field.to_owned(),
            })?;
            columns[i].push(v);
        }
    }
    let labels = std::mem::take(&mut columns[label_at]);
    let features = header
        .into_iter()
        .zip(columns)
        .enumerate()
        .filter(|(i, _)| *i != label_at)
        .map(|(_, c)| c)
        .collect();
    Ok(Dataset::new(features, labels)?)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, CsvError> {
    read_dataset(std::fs::File::open(path)?)
}

/// Writes feature columns in dataset order followed by `label`.
pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data.column_names().iter().map(String::as_str).collect();
    header.push(LABEL_COLUMN);
    w.write_record(&header)?;
    let columns: Vec<&[f64]> = data
        .column_names()
        .iter()
        .map(|c| data.column(c).expect("own column"))
        .collect();
    let mut fields = Vec::with_capacity(header.len());
    for r in 0..data.row_count() {
        fields.clear();
        fields.extend(columns.iter().map(|c| c[r].to_string()));
        fields.push(data.labels()[r].to_string());
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}
