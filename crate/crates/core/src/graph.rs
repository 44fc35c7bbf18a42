//! Transformation graphs: the DAG of nodes that compute feature columns from
//! raw inputs and feed them to a single model node.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::borrow::Borrow;
use core::cmp::Reverse;
use core::fmt;

use thiserror::Error;

/// Identifier of a node, unique within one graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Input,
    Transform,
    Model,
}

/// Whether a node runs in the compiled engine or stays in the host interpreter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionClass {
    Compilable,
    Interpreted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostSpec {
    /// Declared per-row cost in microseconds.
    FixedUs(f64),
    /// Cost is measured empirically on a data sample.
    Measure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub execution_class: ExecutionClass,
    pub inputs: Vec<NodeId>,
    pub output_features: Vec<String>,
    pub cost_spec: CostSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("node id must be non-empty")]
    EmptyNodeId,
    #[error("duplicate node id `{0}`")]
    DuplicateNode(NodeId),
    #[error("node `{node}` references unknown node `{missing}`")]
    DanglingReference { node: NodeId, missing: NodeId },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("feature column `{feature}` is produced by both `{first}` and `{second}`")]
    DuplicateFeature {
        feature: String,
        first: NodeId,
        second: NodeId,
    },
    #[error("graph has no Model node")]
    NoModelNode,
    #[error("graph has multiple Model nodes: `{0}` and `{1}`")]
    MultipleModelNodes(NodeId, NodeId),
    #[error("declared model node `{declared}` does not match the Model node `{actual}`")]
    ModelNodeMismatch { declared: NodeId, actual: NodeId },
    #[error("Model node has consumers (`{0}` consumes it)")]
    ModelHasConsumers(NodeId),
    #[error("Input node `{0}` has inputs")]
    InputHasInputs(NodeId),
    #[error("node `{0}` of kind {1:?} has no inputs")]
    MissingInputs(NodeId, NodeKind),
    #[error("graph contains a cycle through `{0}`")]
    Cycle(NodeId),
    #[error("node `{0}` is not reachable from any Input node")]
    Unreachable(NodeId),
    #[error("node `{0}` does not lead to the Model node")]
    DeadNode(NodeId),
    #[error("invalid cost for node `{0}`: costs must be finite and non-negative")]
    InvalidCost(NodeId),
}

/// A topological execution order and its number of class transitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionOrder {
    pub order: Vec<NodeId>,
    pub transitions: usize,
}

/// Validated, immutable transformation DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformationGraph {
    nodes: Vec<TransformNode>,
    index: BTreeMap<NodeId, usize>,
    feature_index: BTreeMap<String, usize>,
    features: Vec<String>,
    consumers: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
    model: usize,
}

impl TransformationGraph {
    /// Builds and validates a graph. Node order is preserved as declared.
    pub fn new(nodes: Vec<TransformNode>, model_node: NodeId) -> Result<Self, GraphError> {
        let mut index: BTreeMap<NodeId, usize> = BTreeMap::new();
        for (i, node) in nodes.iter().enumerate() {
            if node.id.as_str().is_empty() {
                return Err(GraphError::EmptyNodeId);
            }
            if index.insert(node.id.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(node.id.clone()));
            }
        }

        let mut parents = vec![Vec::new(); nodes.len()];
        let mut consumers = vec![Vec::new(); nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            for input in &node.inputs {
                let &p = index
                    .get(input)
                    .ok_or_else(|| GraphError::DanglingReference {
                        node: node.id.clone(),
                        missing: input.clone(),
                    })?;
                if !parents[i].contains(&p) {
                    parents[i].push(p);
                    consumers[p].push(i);
                }
            }
        }

        let mut model: Option<usize> = None;
        for (i, node) in nodes.iter().enumerate() {
            if node.kind == NodeKind::Model {
                if let Some(m) = model {
                    return Err(GraphError::MultipleModelNodes(
                        nodes[m].id.clone(),
                        node.id.clone(),
                    ));
                }
                model = Some(i);
            }
        }
        let model = model.ok_or(GraphError::NoModelNode)?;
        if nodes[model].id != model_node {
            return Err(GraphError::ModelNodeMismatch {
                declared: model_node,
                actual: nodes[model].id.clone(),
            });
        }
        if let Some(&c) = consumers[model].first() {
            return Err(GraphError::ModelHasConsumers(nodes[c].id.clone()));
        }

        let mut feature_index: BTreeMap<String, usize> = BTreeMap::new();
        let mut features = Vec::new();
        for (i, node) in nodes.iter().enumerate() {
            match node.kind {
                NodeKind::Input if !node.inputs.is_empty() => {
                    return Err(GraphError::InputHasInputs(node.id.clone()));
                }
                NodeKind::Transform | NodeKind::Model if node.inputs.is_empty() => {
                    return Err(GraphError::MissingInputs(node.id.clone(), node.kind));
                }
                _ => {}
            }
            if let CostSpec::FixedUs(c) = node.cost_spec {
                if !c.is_finite() || c < 0.0 {
                    return Err(GraphError::InvalidCost(node.id.clone()));
                }
            }
            for f in &node.output_features {
                if let Some(&prev) = feature_index.get(f) {
                    return Err(GraphError::DuplicateFeature {
                        feature: f.clone(),
                        first: nodes[prev].id.clone(),
                        second: node.id.clone(),
                    });
                }
                feature_index.insert(f.clone(), i);
                features.push(f.clone());
            }
        }

        let graph = TransformationGraph {
            nodes,
            index,
            feature_index,
            features,
            consumers,
            parents,
            model,
        };
        graph.check_acyclic()?;
        graph.check_reachability()?;
        Ok(graph)
    }

    fn check_acyclic(&self) -> Result<(), GraphError> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; self.nodes.len()];
        for start in 0..self.nodes.len() {
            if state[start] != 0 {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            state[start] = 1;
            while let Some(top) = stack.last_mut() {
                let node = top.0;
                if let Some(&child) = self.consumers[node].get(top.1) {
                    top.1 += 1;
                    match state[child] {
                        0 => {
                            state[child] = 1;
                            stack.push((child, 0));
                        }
                        1 => return Err(GraphError::Cycle(self.nodes[child].id.clone())),
                        _ => {}
                    }
                } else {
                    state[node] = 2;
                    stack.pop();
                }
            }
        }
        Ok(())
    }

    fn check_reachability(&self) -> Result<(), GraphError> {
        let n = self.nodes.len();
        let mut from_input = vec![false; n];
        let mut queue: Vec<usize> = (0..n)
            .filter(|&i| self.nodes[i].kind == NodeKind::Input)
            .collect();
        for &i in &queue {
            from_input[i] = true;
        }
        while let Some(i) = queue.pop() {
            for &c in &self.consumers[i] {
                if !from_input[c] {
                    from_input[c] = true;
                    queue.push(c);
                }
            }
        }
        if let Some(i) = (0..n).find(|&i| !from_input[i]) {
            return Err(GraphError::Unreachable(self.nodes[i].id.clone()));
        }

        let to_model = self.ancestor_mask(self.model);
        if let Some(i) = (0..n).find(|&i| !to_model[i]) {
            return Err(GraphError::DeadNode(self.nodes[i].id.clone()));
        }
        Ok(())
    }

    fn ancestor_mask(&self, node: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        seen[node] = true;
        let mut stack = vec![node];
        while let Some(i) = stack.pop() {
            for &p in &self.parents[i] {
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        seen
    }

    pub fn nodes(&self) -> &[TransformNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &str) -> Option<&TransformNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn model_node(&self) -> &TransformNode {
        &self.nodes[self.model]
    }

    /// All feature columns, in declaration order.
    pub fn feature_columns(&self) -> &[String] {
        &self.features
    }

    pub fn producer(&self, feature: &str) -> Option<&NodeId> {
        self.feature_index.get(feature).map(|&i| &self.nodes[i].id)
    }

    /// Map from feature column to the node producing it.
    pub fn feature_index(&self) -> impl Iterator<Item = (&str, &NodeId)> {
        self.feature_index
            .iter()
            .map(|(f, &i)| (f.as_str(), &self.nodes[i].id))
    }

    /// Every node from which `id` is reachable, including `id` itself.
    pub fn ancestors(&self, id: &str) -> Result<BTreeSet<NodeId>, GraphError> {
        let &i = self
            .index
            .get(id)
            .ok_or_else(|| GraphError::UnknownNode(id.to_owned()))?;
        Ok(self
            .ancestor_mask(i)
            .into_iter()
            .enumerate()
            .filter(|&(_, hit)| hit)
            .map(|(j, _)| self.nodes[j].id.clone())
            .collect())
    }

    /// Kahn's algorithm with lexicographic tie-breaking on node ids. The model
    /// node always comes last since every other node is one of its ancestors.
    pub fn topological_order(&self) -> Vec<NodeId> {
        self.topological_indices()
            .into_iter()
            .map(|i| self.nodes[i].id.clone())
            .collect()
    }

    fn topological_indices(&self) -> Vec<usize> {
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<(&NodeId, usize)>> = indegree
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d == 0)
            .map(|(i, _)| Reverse((&self.nodes[i].id, i)))
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(Reverse((_, i))) = ready.pop() {
            order.push(i);
            for &c in &self.consumers[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(Reverse((&self.nodes[c].id, c)));
                }
            }
        }
        order
    }

    /// Orders the graph for execution, hoisting interpreted nodes toward the
    /// front to reduce compiled/interpreted boundaries.
    ///
    /// Starting from the lexicographic topological order, each interpreted
    /// node (taken in that order) is moved to the earliest index after all of
    /// its inputs. A move is kept only if it does not increase the transition
    /// count, so the result never has more transitions than the plain
    /// topological order. The model node is never moved.
    pub fn sort_minimizing_transitions(&self) -> ExecutionOrder {
        let mut order = self.topological_indices();
        let interpreted: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&i| {
                i != self.model && self.nodes[i].execution_class == ExecutionClass::Interpreted
            })
            .collect();

        for node in interpreted {
            let at = order
                .iter()
                .position(|&i| i == node)
                .expect("node in order");
            let earliest = order[..at]
                .iter()
                .rposition(|i| self.parents[node].contains(i))
                .map_or(0, |p| p + 1);
            if earliest == at {
                continue;
            }
            let before = self.transitions_of(&order);
            let mut candidate = order.clone();
            candidate.remove(at);
            candidate.insert(earliest, node);
            if self.transitions_of(&candidate) <= before {
                order = candidate;
            }
        }

        let transitions = self.transitions_of(&order);
        ExecutionOrder {
            order: order
                .into_iter()
                .map(|i| self.nodes[i].id.clone())
                .collect(),
            transitions,
        }
    }

    fn transitions_of(&self, order: &[usize]) -> usize {
        order
            .windows(2)
            .filter(|w| self.nodes[w[0]].execution_class != self.nodes[w[1]].execution_class)
            .count()
    }

    /// Number of adjacent pairs with differing execution class.
    pub fn transition_count(&self, order: &[NodeId]) -> Result<usize, GraphError> {
        let idx = self.indices_of(order)?;
        Ok(self.transitions_of(&idx))
    }

    /// True if `order` lists every node exactly once with each node after all
    /// of its inputs.
    pub fn is_topological_order(&self, order: &[NodeId]) -> bool {
        let Ok(idx) = self.indices_of(order) else {
            return false;
        };
        if idx.len() != self.nodes.len() {
            return false;
        }
        let mut pos = vec![usize::MAX; self.nodes.len()];
        for (p, &i) in idx.iter().enumerate() {
            if pos[i] != usize::MAX {
                return false;
            }
            pos[i] = p;
        }
        (0..self.nodes.len()).all(|i| self.parents[i].iter().all(|&p| pos[p] < pos[i]))
    }

    fn indices_of(&self, order: &[NodeId]) -> Result<Vec<usize>, GraphError> {
        order
            .iter()
            .map(|id| {
                self.index
                    .get(id)
                    .copied()
                    .ok_or_else(|| GraphError::UnknownNode(id.as_str().to_owned()))
            })
            .collect()
    }

    /// Restricts `order` to the nodes in `subset`, keeping relative order.
    pub fn filter_order(order: &[NodeId], subset: &BTreeSet<NodeId>) -> Vec<NodeId> {
        order
            .iter()
            .filter(|n| subset.contains(*n))
            .cloned()
            .collect()
    }
}
