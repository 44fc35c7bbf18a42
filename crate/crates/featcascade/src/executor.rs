//! Feature executor backed by a materialized dataset.
//!
//! Every node "computes" its output columns by copying them out of the
//! dataset, and pays for it by spinning on the clock for its per-row cost.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use featcascade_core::{
    ColumnBatch, CostSpec, Dataset, ExecutorError, FeatureExecutor, NodeId, TransformationGraph,
};

/// Busy-waits for `us` microseconds.
pub fn spin_for_us(us: f64) {
    if us <= 0.0 {
        return;
    }
    let until = Instant::now() + Duration::from_secs_f64(us * 1e-6);
    while Instant::now() < until {
        std::hint::spin_loop();
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedExecutor {
    data: Arc<Dataset>,
    outputs: BTreeMap<NodeId, Vec<String>>,
    per_row_us: BTreeMap<NodeId, f64>,
    delay: bool,
}

impl SimulatedExecutor {
    /// Fixed-cost nodes spin for their declared cost; measured nodes cost
    /// nothing unless given one with [`SimulatedExecutor::with_node_cost`].
    pub fn new(graph: &TransformationGraph, data: Arc<Dataset>) -> Result<Self, ExecutorError> {
        let mut outputs = BTreeMap::new();
        let mut per_row_us = BTreeMap::new();
        for node in graph.nodes() {
            for f in &node.output_features {
                if !data.has_column(f) {
                    return Err(ExecutorError::at(
                        &node.id,
                        format!("dataset has no column `{f}`"),
                    ));
                }
            }
            outputs.insert(node.id.clone(), node.output_features.clone());
            if let CostSpec::FixedUs(c) = node.cost_spec {
                per_row_us.insert(node.id.clone(), c);
            }
        }
        Ok(SimulatedExecutor {
            data,
            outputs,
            per_row_us,
            delay: true,
        })
    }

    pub fn with_node_cost(mut self, node: impl Into<NodeId>, per_row_us: f64) -> Self {
        self.per_row_us.insert(node.into(), per_row_us);
        self
    }

    /// Same outputs, no spinning.
    pub fn without_delay(mut self) -> Self {
        self.delay = false;
        self
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }
}

impl FeatureExecutor for SimulatedExecutor {
    fn run(&self, nodes: &[NodeId], rows: &[usize]) -> Result<ColumnBatch, ExecutorError> {
        let mut batch = ColumnBatch::new();
        for id in nodes {
            let features = self
                .outputs
                .get(id)
                .ok_or_else(|| ExecutorError::at(id, "unknown node"))?;
            if self.delay {
                spin_for_us(self.per_row_us.get(id).copied().unwrap_or(0.0) * rows.len() as f64);
            }
            for f in features {
                let column = self.data.column(f).expect("checked at construction");
                let values =
                    rows.iter()
                        .map(|&r| {
                            column.get(r).copied().ok_or_else(|| {
                                ExecutorError::at(id, format!("row {r} out of range"))
                            })
                        })
                        .collect::<Result<Vec<f64>, _>>()?;
                batch.insert(f.clone(), values);
            }
        }
        Ok(batch)
    }
}
