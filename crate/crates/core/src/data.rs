//! Dataset representation, CSV ingestion and data splitting.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, stream};

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copies the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Matrix> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.cols) {
            return Err(Error::ColumnOutOfRange {
                index: bad,
                cols: self.cols,
            });
        }
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            let row = self.row(r);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: cols.len(),
            data,
        })
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    /// Column-wise concatenation `[self || other]`.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: other.rows,
            });
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Column-major copy, one `Vec` per column.
    pub fn to_columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|c| self.column(c)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    Classification { num_classes: usize },
}

impl TaskKind {
    pub fn num_classes(&self) -> Option<usize> {
        match *self {
            TaskKind::Regression => None,
            TaskKind::Classification { num_classes } => Some(num_classes),
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, TaskKind::Classification { .. })
    }
}

/// Feature matrix, target vector and task description.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    values: Matrix,
    target: Vec<f64>,
    feature_names: Vec<String>,
    task: TaskKind,
}

impl DataMatrix {
    pub fn new(values: Matrix, target: Vec<f64>, feature_names: Vec<String>, task: TaskKind) -> Result<Self> {
        if values.rows() != target.len() {
            return Err(Error::DimensionMismatch {
                expected: values.rows(),
                got: target.len(),
            });
        }
        if feature_names.len() != values.cols() {
            return Err(Error::DimensionMismatch {
                expected: values.cols(),
                got: feature_names.len(),
            });
        }
        if values.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        for (i, &v) in values.as_slice().iter().enumerate() {
            if !v.is_finite() {
                let cols = values.cols().max(1);
                return Err(Error::NonFinite {
                    row: i / cols,
                    column: feature_names[i % cols].clone(),
                });
            }
        }
        if let Some(row) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row,
                column: "<target>".into(),
            });
        }
        validate_labels(&target, task)?;
        Ok(Self {
            values,
            target,
            feature_names,
            task,
        })
    }

    /// Reinterprets an integer-valued target as class labels, inferring the
    /// class count as `max label + 1`.
    pub fn into_classification(self) -> Result<Self> {
        let max = self.target.iter().copied().fold(0.0_f64, f64::max);
        let num_classes = (max as usize + 1).max(2);
        validate_labels(&self.target, TaskKind::Classification { num_classes })?;
        Ok(Self {
            task: TaskKind::Classification { num_classes },
            ..self
        })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn n_samples(&self) -> usize {
        self.values.rows()
    }

    pub fn n_features(&self) -> usize {
        self.values.cols()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Keeps the listed columns in the listed order. An empty list is an error.
    pub fn select_columns(&self, cols: &[usize]) -> Result<DataMatrix> {
        if cols.is_empty() {
            return Err(Error::EmptySelection);
        }
        let values = self.values.select_columns(cols)?;
        Ok(DataMatrix {
            values,
            target: self.target.clone(),
            feature_names: cols.iter().map(|&c| self.feature_names[c].clone()).collect(),
            task: self.task,
        })
    }

    pub fn select_mask(&self, mask: &[bool]) -> Result<DataMatrix> {
        if mask.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: mask.len(),
            });
        }
        let cols: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        self.select_columns(&cols)
    }

    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        DataMatrix {
            values: self.values.select_rows(rows),
            target: rows.iter().map(|&r| self.target[r]).collect(),
            feature_names: self.feature_names.clone(),
            task: self.task,
        }
    }

    /// Writes the dataset as CSV with the target as the last column.
    pub fn write_csv<W: Write>(&self, out: W, target_name: &str) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(target_name);
        writer.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for r in 0..self.n_samples() {
            record.clear();
            record.extend(self.values.row(r).iter().map(|v| v.to_string()));
            record.push(self.target[r].to_string());
            writer.write_record(&record)?;
        }
        writer.flush().map_err(|source| Error::Io {
            path: "<csv output>".into(),
            source,
        })?;
        Ok(())
    }
}

fn validate_labels(target: &[f64], task: TaskKind) -> Result<()> {
    if let TaskKind::Classification { num_classes } = task {
        if num_classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "classification needs at least 2 classes, got {num_classes}"
            )));
        }
        for (row, &label) in target.iter().enumerate() {
            if label.fract() != 0.0 || label < 0.0 || label >= num_classes as f64 {
                return Err(Error::InvalidLabel {
                    row,
                    label,
                    num_classes,
                });
            }
        }
    }
    Ok(())
}

/// Identifies the target column of a CSV file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
}

impl From<&str> for TargetColumn {
    fn from(s: &str) -> Self {
        TargetColumn::Name(s.to_string())
    }
}

pub fn load_csv(path: impl AsRef<Path>, target: &TargetColumn, task: TaskKind) -> Result<DataMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, target, task)
}

pub fn read_csv<R: std::io::Read>(input: R, target: &TargetColumn, task: TaskKind) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let target_idx = match target {
        TargetColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingTarget(format!("'{name}'")))?,
        TargetColumn::Index(i) if *i < headers.len() => *i,
        TargetColumn::Index(i) => return Err(Error::MissingTarget(format!("#{i}"))),
    };
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut values = Vec::new();
    let mut y = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (col, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                row: row + 1,
                column: headers[col].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumeric {
                    row: row + 1,
                    column: headers[col].clone(),
                    value: cell.to_string(),
                });
            }
            if col == target_idx {
                y.push(v);
            } else {
                values.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let matrix = Matrix::new(y.len(), feature_names.len(), values)?;
    DataMatrix::new(matrix, y, feature_names, task)
}

/// One cross-validation fold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` and cuts it into `k` test folds whose sizes differ by at
/// most one; the first `n % k` folds get the extra sample.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("k must lie in [2, {n}], got {k}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng_from(seed, &[stream::KFOLD]));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut test = order[start..start + size].to_vec();
        test.sort_unstable();
        let mut in_test = vec![false; n];
        for &i in &test {
            in_test[i] = true;
        }
        let train = (0..n).filter(|&i| !in_test[i]).collect();
        folds.push(Fold { train, test });
        start += size;
    }
    Ok(folds)
}
