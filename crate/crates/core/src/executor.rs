//! Abstraction over whatever actually computes feature columns at serving time.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::data::FeatureMatrix;
use crate::graph::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("executor failed{}: {message}", node.as_ref().map(|n| alloc::format!(" at node `{n}`")).unwrap_or_default())]
pub struct ExecutorError {
    pub node: Option<NodeId>,
    pub message: String,
}

impl ExecutorError {
    pub fn at(node: &NodeId, message: impl Into<String>) -> Self {
        ExecutorError {
            node: Some(node.clone()),
            message: message.into(),
        }
    }

    pub fn new(message: impl Into<String>) -> Self {
        ExecutorError {
            node: None,
            message: message.into(),
        }
    }
}

/// Feature columns computed for a batch of rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColumnBatch {
    columns: BTreeMap<String, Vec<f64>>,
}

impl ColumnBatch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: String, values: Vec<f64>) {
        self.columns.insert(name, values);
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Moves every column of `other` into `self`.
    pub fn extend(&mut self, other: ColumnBatch) {
        self.columns.extend(other.columns);
    }

    /// Keeps only the listed positions of every column.
    pub fn select(&self, positions: &[usize]) -> ColumnBatch {
        ColumnBatch {
            columns: self
                .columns
                .iter()
                .map(|(k, v)| (k.clone(), positions.iter().map(|&p| v[p]).collect()))
                .collect(),
        }
    }

    /// Assembles the named columns into a matrix with `rows` rows.
    pub fn matrix(&self, columns: &[String], rows: usize) -> Result<FeatureMatrix, ExecutorError> {
        let mut picked = Vec::with_capacity(columns.len());
        for c in columns {
            let v = self.get(c).ok_or_else(|| {
                ExecutorError::new(alloc::format!("column `{c}` was not computed"))
            })?;
            if v.len() != rows {
                return Err(ExecutorError::new(alloc::format!(
                    "column `{c}` has {} values for {rows} rows",
                    v.len()
                )));
            }
            picked.push(v);
        }
        Ok(FeatureMatrix::from_columns(rows, &picked))
    }
}

/// Runs graph nodes for a set of raw input rows.
///
/// `nodes` arrive in a valid execution order. The returned batch holds the
/// output feature columns of exactly those nodes, one value per requested row
/// in request order.
pub trait FeatureExecutor {
    fn run(&self, nodes: &[NodeId], rows: &[usize]) -> Result<ColumnBatch, ExecutorError>;
}
