//! Feature groups: partitioning feature columns into computationally
//! independent sets, and measuring each set's cost and importance.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::cost::NodeCosts;
use crate::data::Dataset;
use crate::graph::{NodeId, NodeKind, TransformationGraph};
use crate::model::{ModelBundle, ModelError, TrainedModel};
use crate::rng_for;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroupError {
    #[error("no cost available for node `{0}`")]
    MissingNodeCost(NodeId),
    #[error("group column `{0}` is missing from the data or the model")]
    MissingColumn(String),
    #[error("n_shuffles must be at least 1")]
    NoShuffles,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A set of feature columns that are cheap to compute together.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGroup {
    pub id: usize,
    /// Member columns in graph declaration order.
    pub columns: Vec<String>,
    /// Every non-model node needed to compute the columns.
    pub producing_nodes: BTreeSet<NodeId>,
    /// Standalone cost of `producing_nodes`, in microseconds per row.
    pub cost_us: f64,
    pub importance: f64,
}

/// Cost of arbitrary sets of groups with shared nodes counted once.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCostTable {
    node_costs: BTreeMap<NodeId, f64>,
    group_nodes: Vec<BTreeSet<NodeId>>,
    full_cost_us: f64,
}

impl GroupCostTable {
    /// Input nodes cost 0 whether or not `node_costs` lists them.
    pub fn new(
        graph: &TransformationGraph,
        groups: &[FeatureGroup],
        node_costs: &NodeCosts,
    ) -> Result<Self, GroupError> {
        let mut costs = BTreeMap::new();
        for g in groups {
            for n in &g.producing_nodes {
                let is_input = graph
                    .node(n.as_str())
                    .is_some_and(|t| t.kind == NodeKind::Input);
                let c = match node_costs.get(n) {
                    _ if is_input => 0.0,
                    Some(&c) => c,
                    None => return Err(GroupError::MissingNodeCost(n.clone())),
                };
                costs.insert(n.clone(), c);
            }
        }
        let mut table = GroupCostTable {
            node_costs: costs,
            group_nodes: groups.iter().map(|g| g.producing_nodes.clone()).collect(),
            full_cost_us: 0.0,
        };
        let all: Vec<usize> = (0..groups.len()).collect();
        table.full_cost_us = table.cost_of(&all);
        Ok(table)
    }

    /// cost(F): all groups together.
    pub fn full_cost_us(&self) -> f64 {
        self.full_cost_us
    }

    pub fn group_count(&self) -> usize {
        self.group_nodes.len()
    }

    pub fn group_cost_us(&self, id: usize) -> f64 {
        self.cost_of(&[id])
    }

    pub fn node_cost_us(&self, node: &NodeId) -> f64 {
        self.node_costs.get(node).copied().unwrap_or(0.0)
    }

    pub fn group_nodes(&self, id: usize) -> &BTreeSet<NodeId> {
        &self.group_nodes[id]
    }

    /// Union of the groups' producing nodes.
    pub fn nodes_of(&self, ids: &[usize]) -> BTreeSet<NodeId> {
        ids.iter()
            .flat_map(|&i| self.group_nodes[i].iter().cloned())
            .collect()
    }

    /// cost(S) with shared producing nodes counted once.
    pub fn cost_of(&self, ids: &[usize]) -> f64 {
        let nodes: BTreeSet<&NodeId> = ids
            .iter()
            .flat_map(|&i| self.group_nodes[i].iter())
            .collect();
        nodes.into_iter().map(|n| self.node_costs[n]).sum()
    }
}

fn node_set_cost(nodes: &BTreeSet<NodeId>, costs: &BTreeMap<&NodeId, f64>) -> f64 {
    nodes.iter().map(|n| costs[n]).sum()
}

/// Partitions the graph's feature columns into groups.
///
/// Two features join the same group when the cost of their shared
/// dependencies exceeds the cost of each one's unshared dependencies. The
/// pairwise relation is closed transitively, so the result is a partition.
/// Groups are numbered in order of their first column.
pub fn identify_feature_groups(
    graph: &TransformationGraph,
    node_costs: &NodeCosts,
) -> Result<Vec<FeatureGroup>, GroupError> {
    let model = &graph.model_node().id;
    let mut costs: BTreeMap<&NodeId, f64> = BTreeMap::new();
    for node in graph.nodes() {
        let c = match node.kind {
            NodeKind::Input => 0.0,
            NodeKind::Model => continue,
            NodeKind::Transform => *node_costs
                .get(&node.id)
                .ok_or_else(|| GroupError::MissingNodeCost(node.id.clone()))?,
        };
        costs.insert(&node.id, c);
    }

    let features = graph.feature_columns();
    let deps: Vec<BTreeSet<NodeId>> = features
        .iter()
        .map(|f| {
            let producer = graph.producer(f).expect("feature has a producer");
            let mut set = graph.ancestors(producer.as_str()).expect("producer exists");
            set.remove(model);
            set
        })
        .collect();

    let mut parent: Vec<usize> = (0..features.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for a in 0..features.len() {
        for b in a + 1..features.len() {
            let shared: BTreeSet<NodeId> = deps[a].intersection(&deps[b]).cloned().collect();
            let shared_cost = node_set_cost(&shared, &costs);
            let only_a: BTreeSet<NodeId> = deps[a].difference(&shared).cloned().collect();
            let only_b: BTreeSet<NodeId> = deps[b].difference(&shared).cloned().collect();
            if shared_cost > node_set_cost(&only_a, &costs)
                && shared_cost > node_set_cost(&only_b, &costs)
            {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }

    let mut by_root: BTreeMap<usize, usize> = BTreeMap::new();
    let mut groups: Vec<FeatureGroup> = Vec::new();
    for (i, f) in features.iter().enumerate() {
        let root = find(&mut parent, i);
        let id = *by_root.entry(root).or_insert_with(|| {
            groups.push(FeatureGroup {
                id: groups.len(),
                columns: Vec::new(),
                producing_nodes: BTreeSet::new(),
                cost_us: 0.0,
                importance: 0.0,
            });
            groups.len() - 1
        });
        groups[id].columns.push(f.clone());
        groups[id].producing_nodes.extend(deps[i].iter().cloned());
    }
    for g in &mut groups {
        g.cost_us = node_set_cost(&g.producing_nodes, &costs);
    }
    Ok(groups)
}

/// Mean drop in holdout score when the group's columns are jointly shuffled.
///
/// Every shuffle draws one row permutation and applies it to all member
/// columns at once. The result may be negative.
pub fn permutation_importance(
    group: &FeatureGroup,
    bundle: &dyn ModelBundle,
    model: &TrainedModel,
    holdout: &Dataset,
    n_shuffles: usize,
    seed: u64,
) -> Result<f64, GroupError> {
    if n_shuffles == 0 {
        return Err(GroupError::NoShuffles);
    }
    let positions: Vec<usize> = group
        .columns
        .iter()
        .map(|c| {
            if !holdout.has_column(c) {
                return Err(GroupError::MissingColumn(c.clone()));
            }
            model
                .feature_columns()
                .iter()
                .position(|m| m == c)
                .ok_or_else(|| GroupError::MissingColumn(c.clone()))
        })
        .collect::<Result<_, _>>()?;

    let x = model.project(holdout).map_err(ModelError::from)?;
    let labels = holdout.labels();
    let base = bundle.score(&bundle.predict(model, &x)?, labels);

    let mut rng = rng_for(seed, 0x1_0000 + group.id as u64);
    let mut perm: Vec<usize> = (0..x.rows()).collect();
    let mut total = 0.0;
    for _ in 0..n_shuffles {
        perm.shuffle(&mut rng);
        let mut shuffled = x.clone();
        shuffled.permute_columns(&positions, &perm);
        total += bundle.score(&bundle.predict(model, &shuffled)?, labels);
    }
    Ok(base - total / n_shuffles as f64)
}
