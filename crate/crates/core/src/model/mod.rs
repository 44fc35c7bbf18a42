//! The pluggable model interface and the built-in trainable models.
//!
//! A [`ModelBundle`] bundles training, inference, confidence and scoring
//! behind one object so the optimizers never depend on a concrete model API.
//! Trained parameters live in a [`TrainedModel`] whose payload only the
//! bundle that produced it can interpret.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::any::Any;
use core::fmt;

use thiserror::Error;

use crate::data::{DataError, Dataset, FeatureMatrix};

mod linear;
mod logistic;
mod stumps;

pub use linear::{builtin_linear_regression, LinearRegression};
pub use logistic::{builtin_logistic_regression, LogisticRegression};
pub use stumps::{builtin_stump_ensemble, StumpEnsemble};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("labels must be 0 or 1 for binary classification (found {0})")]
    NonBinaryLabels(f64),
    #[error("empty feature matrix ({rows} rows x {cols} columns)")]
    EmptyFeatures { rows: usize, cols: usize },
    #[error("feature matrix has {actual} columns, model expects {expected}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("{rows} feature rows but {labels} labels")]
    LabelMismatch { rows: usize, labels: usize },
    #[error("confidence is only defined for classification models")]
    NoConfidence,
    #[error("model payload does not belong to the `{0}` bundle")]
    ForeignModel(&'static str),
    #[error("cannot decode `{bundle}` payload: {reason}")]
    Decode {
        bundle: &'static str,
        reason: &'static str,
    },
    #[error("{0}")]
    Data(#[from] DataError),
}

/// Parameters of a trained model plus the ordered columns it was trained on.
#[derive(Clone)]
pub struct TrainedModel {
    feature_columns: Vec<String>,
    payload: Arc<dyn Any + Send + Sync>,
}

impl TrainedModel {
    pub fn new<P: Any + Send + Sync>(feature_columns: Vec<String>, payload: P) -> Self {
        TrainedModel {
            feature_columns,
            payload: Arc::new(payload),
        }
    }

    pub fn feature_columns(&self) -> &[String] {
        &self.feature_columns
    }

    pub fn payload<P: Any>(&self) -> Option<&P> {
        self.payload.downcast_ref()
    }

    /// Projects `data` onto this model's columns, in order.
    pub fn project(&self, data: &Dataset) -> Result<FeatureMatrix, DataError> {
        data.project(&self.feature_columns)
    }

    pub(crate) fn check_width(&self, x: &FeatureMatrix) -> Result<(), ModelError> {
        if x.cols() != self.feature_columns.len() {
            return Err(ModelError::ShapeMismatch {
                expected: self.feature_columns.len(),
                actual: x.cols(),
            });
        }
        Ok(())
    }
}

impl fmt::Debug for TrainedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrainedModel")
            .field("feature_columns", &self.feature_columns)
            .finish_non_exhaustive()
    }
}

/// Registered train / predict / confidence / score functions for one model class.
pub trait ModelBundle: Send + Sync {
    fn name(&self) -> &'static str;

    fn task(&self) -> Task;

    /// Trains on `x`, whose columns are named by `columns` in order.
    fn train(
        &self,
        columns: &[String],
        x: &FeatureMatrix,
        y: &[f64],
    ) -> Result<TrainedModel, ModelError>;

    fn predict(&self, model: &TrainedModel, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError>;

    /// Per-row confidence in [0, 1]. Only classification bundles implement it.
    fn confidence(
        &self,
        _model: &TrainedModel,
        _x: &FeatureMatrix,
    ) -> Result<Vec<f64>, ModelError> {
        Err(ModelError::NoConfidence)
    }

    /// Real-valued score used to rank rows (probability or regression output).
    fn rank_scores(&self, model: &TrainedModel, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError>;

    /// Accuracy-like metric, higher is better.
    fn score(&self, predictions: &[f64], labels: &[f64]) -> f64;

    fn encode(&self, model: &TrainedModel) -> Result<Vec<u8>, ModelError>;

    fn decode(&self, columns: Vec<String>, bytes: &[u8]) -> Result<TrainedModel, ModelError>;

    /// Trains on the named columns of `data`.
    fn train_on(&self, data: &Dataset, columns: &[String]) -> Result<TrainedModel, ModelError> {
        let x = data.project(columns)?;
        self.train(columns, &x, data.labels())
    }
}

/// Fraction of exactly matching predictions.
pub fn accuracy(predictions: &[f64], labels: &[f64]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, y)| p == y)
        .count();
    correct as f64 / labels.len() as f64
}

pub(crate) fn check_training_input(x: &FeatureMatrix, y: &[f64]) -> Result<(), ModelError> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(ModelError::EmptyFeatures {
            rows: x.rows(),
            cols: x.cols(),
        });
    }
    if x.rows() != y.len() {
        return Err(ModelError::LabelMismatch {
            rows: x.rows(),
            labels: y.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_binary(y: &[f64]) -> Result<(), ModelError> {
    match y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        Some(&bad) => Err(ModelError::NonBinaryLabels(bad)),
        None => Ok(()),
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Per-column centering and scaling learned from training data.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let n = x.rows() as f64;
        let mut mean = alloc::vec![0.0; x.cols()];
        for r in 0..x.rows() {
            for (m, v) in mean.iter_mut().zip(x.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = alloc::vec![0.0; x.cols()];
        for r in 0..x.rows() {
            for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = libm::sqrt(s / n);
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply_row(&self, row: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(row).zip(&self.mean).zip(&self.scale) {
            *o = (v - m) / s;
        }
    }

    pub fn transform(&self, x: &FeatureMatrix) -> FeatureMatrix {
        let mut out = FeatureMatrix::zeros(x.rows(), x.cols());
        let mut buf = alloc::vec![0.0; x.cols()];
        for r in 0..x.rows() {
            self.apply_row(x.row(r), &mut buf);
            for (c, &v) in buf.iter().enumerate() {
                out.set(r, c, v);
            }
        }
        out
    }
}

/// Little-endian f64 codec for model payloads.
pub(crate) mod codec {
    use alloc::vec::Vec;

    pub fn put(out: &mut Vec<u8>, values: &[f64]) {
        out.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn put_u64(out: &mut Vec<u8>, v: u64) {
        out.extend_from_slice(&v.to_le_bytes());
    }

    pub struct Reader<'a> {
        bytes: &'a [u8],
    }

    impl<'a> Reader<'a> {
        pub fn new(bytes: &'a [u8]) -> Self {
            Reader { bytes }
        }

        pub fn u64(&mut self) -> Option<u64> {
            let (head, rest) = self.bytes.split_at_checked(8)?;
            self.bytes = rest;
            Some(u64::from_le_bytes(head.try_into().ok()?))
        }

        pub fn f64s(&mut self) -> Option<Vec<f64>> {
            let n = usize::try_from(self.u64()?).ok()?;
            if self.bytes.len() / 8 < n {
                return None;
            }
            (0..n).map(|_| self.u64().map(f64::from_bits)).collect()
        }

        pub fn finished(&self) -> bool {
            self.bytes.is_empty()
        }
    }
}
