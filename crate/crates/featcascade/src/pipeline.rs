//! JSON pipeline description.
//!
//! ```json
//! {
//!   "nodes": [
//!     {"id": "raw", "kind": "input", "execution_class": "compilable",
//!      "inputs": [], "output_features": [], "cost_spec": {"fixed_us": 0}},
//!     {"id": "tfidf", "kind": "transform", "execution_class": "interpreted",
//!      "inputs": ["raw"], "output_features": ["w0", "w1"], "cost_spec": {"measure": true}},
//!     {"id": "model", "kind": "model", "execution_class": "compilable",
//!      "inputs": ["tfidf"], "output_features": [], "cost_spec": {"fixed_us": 0}}
//!   ],
//!   "model_node": "model"
//! }
//! ```

use featcascade_core::{
    CostSpec, ExecutionClass, GraphError, NodeId, NodeKind, TransformNode, TransformationGraph,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("malformed pipeline document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid pipeline: {0}")]
    Invalid(#[from] GraphError),
    #[error("cost_spec must be {{\"fixed_us\": n}} or {{\"measure\": true}}")]
    BadCostSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineDoc {
    pub nodes: Vec<NodeDoc>,
    pub model_node: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: String,
    pub kind: KindDoc,
    pub execution_class: ClassDoc,
    pub inputs: Vec<String>,
    pub output_features: Vec<String>,
    pub cost_spec: CostDoc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindDoc {
    Input,
    Transform,
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassDoc {
    Compilable,
    Interpreted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostDoc {
    Fixed(FixedCost),
    Measure(MeasureCost),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedCost {
    pub fixed_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureCost {
    pub measure: bool,
}

impl From<KindDoc> for NodeKind {
    fn from(k: KindDoc) -> Self {
        match k {
            KindDoc::Input => NodeKind::Input,
            KindDoc::Transform => NodeKind::Transform,
            KindDoc::Model => NodeKind::Model,
        }
    }
}

impl From<NodeKind> for KindDoc {
    fn from(k: NodeKind) -> Self {
        match k {
            NodeKind::Input => KindDoc::Input,
            NodeKind::Transform => KindDoc::Transform,
            NodeKind::Model => KindDoc::Model,
        }
    }
}

impl From<ClassDoc> for ExecutionClass {
    fn from(c: ClassDoc) -> Self {
        match c {
            ClassDoc::Compilable => ExecutionClass::Compilable,
            ClassDoc::Interpreted => ExecutionClass::Interpreted,
        }
    }
}

impl From<ExecutionClass> for ClassDoc {
    fn from(c: ExecutionClass) -> Self {
        match c {
            ExecutionClass::Compilable => ClassDoc::Compilable,
            ExecutionClass::Interpreted => ClassDoc::Interpreted,
        }
    }
}

impl PipelineDoc {
    pub fn into_graph(self) -> Result<TransformationGraph, PipelineError> {
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for n in self.nodes {
            let cost_spec = match n.cost_spec {
                CostDoc::Fixed(FixedCost { fixed_us }) => CostSpec::FixedUs(fixed_us),
                CostDoc::Measure(MeasureCost { measure: true }) => CostSpec::Measure,
                CostDoc::Measure(_) => return Err(PipelineError::BadCostSpec),
            };
            nodes.push(TransformNode {
                id: NodeId::from(n.id),
                kind: n.kind.into(),
                execution_class: n.execution_class.into(),
                inputs: n.inputs.into_iter().map(NodeId::from).collect(),
                output_features: n.output_features,
                cost_spec,
            });
        }
        Ok(TransformationGraph::new(
            nodes,
            NodeId::from(self.model_node),
        )?)
    }

    pub fn from_graph(graph: &TransformationGraph) -> Self {
        PipelineDoc {
            nodes: graph
                .nodes()
                .iter()
                .map(|n| NodeDoc {
                    id: n.id.to_string(),
                    kind: n.kind.into(),
                    execution_class: n.execution_class.into(),
                    inputs: n.inputs.iter().map(|i| i.to_string()).collect(),
                    output_features: n.output_features.clone(),
                    cost_spec: match n.cost_spec {
                        CostSpec::FixedUs(fixed_us) => CostDoc::Fixed(FixedCost { fixed_us }),
                        CostSpec::Measure => CostDoc::Measure(MeasureCost { measure: true }),
                    },
                })
                .collect(),
            model_node: graph.model_node().id.to_string(),
        }
    }
}

/// Parses and validates a pipeline document.
pub fn load_graph(text: &str) -> Result<TransformationGraph, PipelineError> {
    serde_json::from_str::<PipelineDoc>(text)?.into_graph()
}

pub fn graph_to_json(graph: &TransformationGraph) -> String {
    serde_json::to_string_pretty(&PipelineDoc::from_graph(graph)).expect("pipeline serializes")
}
