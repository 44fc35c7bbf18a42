//! Synthetic classification workloads with planted easy rows.
//!
//! Each row draws a latent `z ~ N(0, 1)`; the label is `z > 0`, flipped with
//! probability `label_noise`. A group with signal `s` emits columns
//! `s·z + (1 − s)·ε`. Groups cheaper than the most expensive one are "cheap":
//! on easy rows their signal is amplified, on hard rows they carry only the
//! noise term, so a model reading cheap groups alone is confident exactly on
//! the easy rows.

use featcascade_core::{
    rng_for, CostSpec, Dataset, ExecutionClass, NodeId, NodeKind, TransformNode,
    TransformationGraph,
};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Signal multiplier on easy rows in cheap groups.
pub const EASY_AMPLIFICATION: f64 = 3.0;

pub const INPUT_NODE: &str = "raw";
pub const MODEL_NODE: &str = "model";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub n_columns: usize,
    pub cost_us: f64,
    pub signal_strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticWorkloadSpec {
    pub n_rows: usize,
    pub groups: Vec<GroupSpec>,
    pub easy_fraction: f64,
    pub label_noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorkloadError {
    #[error("workload needs at least 2 rows")]
    TooFewRows,
    #[error("workload needs at least one group")]
    NoGroups,
    #[error("group {0}: {1}")]
    BadGroup(usize, &'static str),
    #[error("{0} must lie in [0, 1]")]
    BadFraction(&'static str),
}

impl SyntheticWorkloadSpec {
    /// Two groups: a cheap one at 10% of the feature cost and an expensive
    /// one, both with signal 0.9; 90% of rows are easy.
    pub fn planted(n_rows: usize, seed: u64) -> Self {
        SyntheticWorkloadSpec {
            n_rows,
            groups: vec![
                GroupSpec {
                    n_columns: 2,
                    cost_us: 5.0,
                    signal_strength: 0.9,
                },
                GroupSpec {
                    n_columns: 4,
                    cost_us: 45.0,
                    signal_strength: 0.9,
                },
            ],
            easy_fraction: 0.9,
            label_noise: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.n_rows < 2 {
            return Err(WorkloadError::TooFewRows);
        }
        if self.groups.is_empty() {
            return Err(WorkloadError::NoGroups);
        }
        for (i, g) in self.groups.iter().enumerate() {
            if g.n_columns == 0 {
                return Err(WorkloadError::BadGroup(i, "n_columns must be at least 1"));
            }
            if !(g.cost_us.is_finite() && g.cost_us >= 0.0) {
                return Err(WorkloadError::BadGroup(
                    i,
                    "cost_us must be finite and non-negative",
                ));
            }
            if !(0.0..=1.0).contains(&g.signal_strength) {
                return Err(WorkloadError::BadGroup(
                    i,
                    "signal_strength must lie in [0, 1]",
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.easy_fraction) {
            return Err(WorkloadError::BadFraction("easy_fraction"));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(WorkloadError::BadFraction("label_noise"));
        }
        Ok(())
    }

    fn is_cheap(&self, g: usize) -> bool {
        let max = self.groups.iter().map(|g| g.cost_us).fold(0.0, f64::max);
        self.groups[g].cost_us < max
    }
}

pub fn group_node(g: usize) -> NodeId {
    NodeId::new(format!("group_{g}"))
}

pub fn column_name(g: usize, c: usize) -> String {
    format!("g{g}_c{c}")
}

/// A generated workload plus which rows were planted easy.
#[derive(Debug, Clone)]
pub struct Workload {
    pub graph: TransformationGraph,
    pub data: Dataset,
    pub easy: Vec<bool>,
}

pub fn generate_workload(spec: &SyntheticWorkloadSpec) -> Result<Workload, WorkloadError> {
    spec.validate()?;
    let n = spec.n_rows;
    let mut rng = rng_for(spec.seed, 0x5EED);
    let mut latent = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut easy = Vec::with_capacity(n);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let flip = rng.gen::<f64>() < spec.label_noise;
        latent.push(z);
        labels.push(if (z > 0.0) != flip { 1.0 } else { 0.0 });
        easy.push(rng.gen::<f64>() < spec.easy_fraction);
    }

    let mut columns = Vec::new();
    let mut nodes = vec![TransformNode {
        id: INPUT_NODE.into(),
        kind: NodeKind::Input,
        execution_class: ExecutionClass::Compilable,
        inputs: vec![],
        output_features: vec![],
        cost_spec: CostSpec::FixedUs(0.0),
    }];
    for (g, group) in spec.groups.iter().enumerate() {
        let cheap = spec.is_cheap(g);
        let s = group.signal_strength;
        let mut names = Vec::with_capacity(group.n_columns);
        for c in 0..group.n_columns {
            let values = (0..n)
                .map(|i| {
                    let eps: f64 = rng.sample(StandardNormal);
                    let signal = match (cheap, easy[i]) {
                        (false, _) => s * latent[i],
                        (true, true) => s * EASY_AMPLIFICATION * latent[i],
                        (true, false) => 0.0,
                    };
                    signal + (1.0 - s) * eps
                })
                .collect();
            names.push(column_name(g, c));
            columns.push((column_name(g, c), values));
        }
        nodes.push(TransformNode {
            id: group_node(g),
            kind: NodeKind::Transform,
            execution_class: if cheap {
                ExecutionClass::Compilable
            } else {
                ExecutionClass::Interpreted
            },
            inputs: vec![INPUT_NODE.into()],
            output_features: names,
            cost_spec: CostSpec::FixedUs(group.cost_us),
        });
    }
    nodes.push(TransformNode {
        id: MODEL_NODE.into(),
        kind: NodeKind::Model,
        execution_class: ExecutionClass::Compilable,
        inputs: (0..spec.groups.len()).map(group_node).collect(),
        output_features: vec![],
        cost_spec: CostSpec::FixedUs(0.0),
    });

    let graph =
        TransformationGraph::new(nodes, MODEL_NODE.into()).expect("generated graph is valid");
    let data = Dataset::new(columns, labels).expect("generated data is finite");
    Ok(Workload { graph, data, easy })
}
