#![allow(dead_code)]

use std::collections::BTreeMap;

use featcascade_core::{
    rng_for, ColumnBatch, CostSpec, Dataset, ExecutionClass, ExecutorError, FeatureExecutor,
    NodeId, NodeKind, TransformNode, TransformationGraph,
};
use rand::Rng;

/// Executor that copies node outputs straight out of a dataset.
pub struct TableExecutor<'a> {
    pub outputs: BTreeMap<NodeId, Vec<String>>,
    pub data: &'a Dataset,
}

impl<'a> TableExecutor<'a> {
    pub fn new(graph: &TransformationGraph, data: &'a Dataset) -> Self {
        TableExecutor {
            outputs: graph
                .nodes()
                .iter()
                .map(|n| (n.id.clone(), n.output_features.clone()))
                .collect(),
            data,
        }
    }
}

impl FeatureExecutor for TableExecutor<'_> {
    fn run(&self, nodes: &[NodeId], rows: &[usize]) -> Result<ColumnBatch, ExecutorError> {
        let mut out = ColumnBatch::new();
        for n in nodes {
            let cols = self
                .outputs
                .get(n)
                .ok_or_else(|| ExecutorError::at(n, "unknown"))?;
            for c in cols {
                let col = self.data.column(c).unwrap();
                out.insert(c.clone(), rows.iter().map(|&r| col[r]).collect());
            }
        }
        Ok(out)
    }
}

pub fn node(id: &str, kind: NodeKind, inputs: &[&str], out: &[String], cost: f64) -> TransformNode {
    TransformNode {
        id: id.into(),
        kind,
        execution_class: ExecutionClass::Compilable,
        inputs: inputs.iter().map(|&i| i.into()).collect(),
        output_features: out.to_vec(),
        cost_spec: CostSpec::FixedUs(cost),
    }
}

fn normal(rng: &mut featcascade_core::Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Graph input -> cheap (cost 10, 2 columns), expensive (cost 90, 2 columns) -> model.
pub fn planted_graph() -> TransformationGraph {
    let cheap = vec!["c0".to_owned(), "c1".to_owned()];
    let dear = vec!["e0".to_owned(), "e1".to_owned()];
    TransformationGraph::new(
        vec![
            node("in", NodeKind::Input, &[], &[], 0.0),
            node("cheap", NodeKind::Transform, &["in"], &cheap, 10.0),
            node("dear", NodeKind::Transform, &["in"], &dear, 90.0),
            node("m", NodeKind::Model, &["cheap", "dear"], &[], 0.0),
        ],
        "m".into(),
    )
    .unwrap()
}

/// 90% of rows are easy: the cheap columns carry an amplified copy of the
/// latent signal. On hard rows the cheap columns are small noise.
pub fn planted_data(n: usize, seed: u64) -> Dataset {
    let mut rng = rng_for(seed, 77);
    let mut cols: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(n)).collect();
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let z = normal(&mut rng);
        let easy = rng.gen::<f64>() < 0.9;
        labels.push(if z > 0.0 { 1.0 } else { 0.0 });
        for c in cols.iter_mut().take(2) {
            let s = if easy { 2.7 * z } else { 0.0 };
            c.push(s + 0.1 * normal(&mut rng));
        }
        for c in cols.iter_mut().skip(2) {
            c.push(0.9 * z + 0.1 * normal(&mut rng));
        }
    }
    let names = ["c0", "c1", "e0", "e1"];
    Dataset::new(
        names.iter().map(|s| s.to_string()).zip(cols).collect(),
        labels,
    )
    .unwrap()
}
