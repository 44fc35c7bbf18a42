//! Per-node and per-model cost inputs to the optimizers.

use alloc::collections::BTreeMap;

use crate::data::FeatureMatrix;
use crate::graph::{CostSpec, NodeId, NodeKind, TransformationGraph};
use crate::model::{ModelBundle, TrainedModel};

/// Per-row cost of each node, in microseconds.
pub type NodeCosts = BTreeMap<NodeId, f64>;

/// Declared costs of every node with a fixed cost spec. Input nodes cost 0
/// regardless of what they declare.
pub fn declared_node_costs(graph: &TransformationGraph) -> NodeCosts {
    graph
        .nodes()
        .iter()
        .filter_map(|n| match (n.kind, n.cost_spec) {
            (NodeKind::Input, _) => Some((n.id.clone(), 0.0)),
            (_, CostSpec::FixedUs(c)) => Some((n.id.clone(), c)),
            (_, CostSpec::Measure) => None,
        })
        .collect()
}

/// Per-row inference cost of a trained model, in microseconds.
pub trait InferenceCost {
    fn per_row_us(
        &self,
        bundle: &dyn ModelBundle,
        model: &TrainedModel,
        sample: &FeatureMatrix,
    ) -> f64;
}

/// Treats model inference as free, so only feature computation is costed.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoInferenceCost;

impl InferenceCost for NoInferenceCost {
    fn per_row_us(&self, _: &dyn ModelBundle, _: &TrainedModel, _: &FeatureMatrix) -> f64 {
        0.0
    }
}
