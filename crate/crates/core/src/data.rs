//! Datasets, row-major feature matrices and train/holdout splitting.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::rng_for;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("column `{column}` has {actual} values, expected {expected}")]
    LengthMismatch {
        column: String,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value in column `{column}` at row {row}")]
    NonFinite { column: String, row: usize },
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("holdout fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("need at least 2 rows to split, got {0}")]
    TooFewRows(usize),
    #[error("label class {0} is absent from one side of the split")]
    DegenerateSplit(f64),
    #[error("row index {index} out of range for {rows} rows")]
    RowOutOfRange { index: usize, rows: usize },
}

/// Dense row-major matrix of feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FeatureMatrix {
            rows,
            cols,
            data: alloc::vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has wrong length");
        FeatureMatrix { rows, cols, data }
    }

    /// Builds a matrix from equally long column vectors.
    pub fn from_columns(rows: usize, columns: &[&[f64]]) -> Self {
        let cols = columns.len();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in columns {
                data.push(c[r]);
            }
        }
        FeatureMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Applies `perm` (new row r takes old row perm[r]) to the listed columns only.
    pub fn permute_columns(&mut self, columns: &[usize], perm: &[usize]) {
        let old: Vec<Vec<f64>> = columns.iter().map(|&c| self.column(c)).collect();
        for (values, &c) in old.iter().zip(columns) {
            for (r, &src) in perm.iter().enumerate() {
                self.set(r, c, values[src]);
            }
        }
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Named numeric feature columns plus a label vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    index: BTreeMap<String, usize>,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn new(columns: Vec<(String, Vec<f64>)>, labels: Vec<f64>) -> Result<Self, DataError> {
        let rows = labels.len();
        if let Some(row) = labels.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite {
                column: String::from("label"),
                row,
            });
        }
        let mut names = Vec::with_capacity(columns.len());
        let mut values = Vec::with_capacity(columns.len());
        let mut index = BTreeMap::new();
        for (name, col) in columns {
            if col.len() != rows {
                return Err(DataError::LengthMismatch {
                    column: name,
                    expected: rows,
                    actual: col.len(),
                });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite { column: name, row });
            }
            if index.insert(name.clone(), names.len()).is_some() {
                return Err(DataError::DuplicateColumn(name));
            }
            names.push(name);
            values.push(col);
        }
        Ok(Dataset {
            names,
            columns: values,
            index,
            labels,
        })
    }

    pub fn row_count(&self) -> usize {
        self.labels.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.index.get(name).map(|&i| self.columns[i].as_slice())
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Matrix of the requested columns, in the requested order.
    pub fn project<S: AsRef<str>>(&self, cols: &[S]) -> Result<FeatureMatrix, DataError> {
        let mut picked = Vec::with_capacity(cols.len());
        for c in cols {
            let c = c.as_ref();
            let &i = self
                .index
                .get(c)
                .ok_or_else(|| DataError::UnknownColumn(String::from(c)))?;
            picked.push(self.columns[i].as_slice());
        }
        Ok(FeatureMatrix::from_columns(self.row_count(), &picked))
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset, DataError> {
        let n = self.row_count();
        if let Some(&index) = rows.iter().find(|&&r| r >= n) {
            return Err(DataError::RowOutOfRange { index, rows: n });
        }
        Ok(Dataset {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            index: self.index.clone(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        })
    }

    /// Stratified, seeded split into (train, holdout).
    ///
    /// The holdout receives `round(holdout_fraction * rows)` rows. When the
    /// labels take at most [`Dataset::MAX_STRATA`] distinct values the split
    /// is stratified by label (largest-remainder allocation per class) and
    /// every class must appear on both sides; otherwise rows are split
    /// uniformly at random.
    pub fn train_holdout_split(
        &self,
        holdout_fraction: f64,
        seed: u64,
    ) -> Result<(Dataset, Dataset), DataError> {
        let (train, holdout) = self.split_indices(holdout_fraction, seed)?;
        Ok((self.select_rows(&train)?, self.select_rows(&holdout)?))
    }

    pub const MAX_STRATA: usize = 16;

    /// Row indices (ascending) of the train and holdout sides of the split.
    pub fn split_indices(
        &self,
        holdout_fraction: f64,
        seed: u64,
    ) -> Result<(Vec<usize>, Vec<usize>), DataError> {
        if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
            return Err(DataError::BadFraction(holdout_fraction));
        }
        let n = self.row_count();
        if n < 2 {
            return Err(DataError::TooFewRows(n));
        }
        let total_holdout = libm::round(holdout_fraction * n as f64) as usize;
        let mut rng = rng_for(seed, 0x5_011d);

        let mut strata: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, &y) in self.labels.iter().enumerate() {
            strata.entry(label_key(y)).or_default().push(i);
            if strata.len() > Self::MAX_STRATA {
                break;
            }
        }

        let mut holdout = Vec::with_capacity(total_holdout);
        if strata.len() > Self::MAX_STRATA {
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(&mut rng);
            holdout.extend_from_slice(&all[..total_holdout]);
        } else {
            let quotas = allocate(&strata, total_holdout, n);
            for ((&key, rows), quota) in strata.iter().zip(quotas) {
                if quota == 0 || quota == rows.len() {
                    return Err(DataError::DegenerateSplit(f64::from_bits(key)));
                }
                let mut rows = rows.clone();
                rows.shuffle(&mut rng);
                holdout.extend_from_slice(&rows[..quota]);
            }
        }

        holdout.sort_unstable();
        let mut in_holdout = alloc::vec![false; n];
        for &r in &holdout {
            in_holdout[r] = true;
        }
        let train = (0..n).filter(|&r| !in_holdout[r]).collect();
        Ok((train, holdout))
    }
}

fn label_key(y: f64) -> u64 {
    // fold -0.0 into 0.0
    if y == 0.0 {
        0.0f64.to_bits()
    } else {
        y.to_bits()
    }
}

/// Largest-remainder allocation of `total` holdout rows across strata.
fn allocate(strata: &BTreeMap<u64, Vec<usize>>, total: usize, n: usize) -> Vec<usize> {
    let exact: Vec<f64> = strata
        .values()
        .map(|rows| rows.len() as f64 * total as f64 / n as f64)
        .collect();
    let mut quotas: Vec<usize> = exact.iter().map(|&e| libm::floor(e) as usize).collect();
    let mut remaining = total - quotas.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - libm::floor(exact[a]);
        let rb = exact[b] - libm::floor(exact[b]);
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for i in order {
        if remaining == 0 {
            break;
        }
        quotas[i] += 1;
        remaining -= 1;
    }
    quotas
}
