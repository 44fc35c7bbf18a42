//! Wall-clock cost measurement.

use std::time::Instant;

use featcascade_core::cost::declared_node_costs;
use featcascade_core::{
    CostSpec, ExecutorError, FeatureExecutor, FeatureMatrix, InferenceCost, ModelBundle, NodeCosts,
    NodeKind, TrainedModel, TransformationGraph,
};

pub const MAX_SAMPLE_ROWS: usize = 1000;
pub const DEFAULT_REPETITIONS: usize = 3;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Median over `repetitions` runs of `f`, in microseconds.
pub fn median_us<F: FnMut()>(repetitions: usize, mut f: F) -> f64 {
    let times = (0..repetitions.max(1))
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64() * 1e6
        })
        .collect();
    median(times)
}

/// Rows used for cost sampling: the first `min(1000, n)`.
pub fn cost_sample(rows: &[usize]) -> &[usize] {
    &rows[..rows.len().min(MAX_SAMPLE_ROWS)]
}

/// Per-row cost of every node. Declared costs are taken as is, input nodes
/// cost 0, and nodes marked for measurement are timed on `sample`.
pub fn measure_node_costs(
    graph: &TransformationGraph,
    sample: &[usize],
    executor: &dyn FeatureExecutor,
    repetitions: usize,
) -> Result<NodeCosts, ExecutorError> {
    assert!(repetitions >= 1, "at least one repetition");
    let mut costs = declared_node_costs(graph);
    for node in graph.nodes() {
        if node.kind == NodeKind::Input || node.cost_spec != CostSpec::Measure {
            continue;
        }
        if sample.is_empty() {
            costs.insert(node.id.clone(), 0.0);
            continue;
        }
        let ids = [node.id.clone()];
        let mut failure = None;
        let us = median_us(repetitions, || {
            if let Err(e) = executor.run(&ids, sample) {
                failure.get_or_insert(e);
            }
        });
        if let Some(mut e) = failure {
            e.node.get_or_insert_with(|| node.id.clone());
            return Err(e);
        }
        costs.insert(node.id.clone(), us / sample.len() as f64);
    }
    Ok(costs)
}

/// Times `bundle.predict` on up to 1000 rows of the sample.
#[derive(Debug, Clone, Copy)]
pub struct MeasuredInferenceCost {
    pub repetitions: usize,
}

impl Default for MeasuredInferenceCost {
    fn default() -> Self {
        MeasuredInferenceCost {
            repetitions: DEFAULT_REPETITIONS,
        }
    }
}

impl InferenceCost for MeasuredInferenceCost {
    fn per_row_us(
        &self,
        bundle: &dyn ModelBundle,
        model: &TrainedModel,
        sample: &FeatureMatrix,
    ) -> f64 {
        let n = sample.rows().min(MAX_SAMPLE_ROWS);
        if n == 0 {
            return 0.0;
        }
        let rows: Vec<usize> = (0..n).collect();
        let x = sample.select_rows(&rows);
        median_us(self.repetitions, || {
            let _ = std::hint::black_box(bundle.predict(model, &x));
        }) / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::SimulatedExecutor;
    use featcascade_core::{Dataset, ExecutionClass, TransformNode};
    use std::sync::Arc;

    fn graph() -> TransformationGraph {
        let n = |id: &str, kind, inputs: &[&str], out: &[&str], cost| TransformNode {
            id: id.into(),
            kind,
            execution_class: ExecutionClass::Interpreted,
            inputs: inputs.iter().map(|&i| i.into()).collect(),
            output_features: out.iter().map(|&s| s.to_owned()).collect(),
            cost_spec: cost,
        };
        TransformationGraph::new(
            vec![
                n("in", NodeKind::Input, &[], &[], CostSpec::FixedUs(7.0)),
                n(
                    "fixed",
                    NodeKind::Transform,
                    &["in"],
                    &["x"],
                    CostSpec::FixedUs(48.0),
                ),
                n(
                    "slow",
                    NodeKind::Transform,
                    &["in"],
                    &["y"],
                    CostSpec::Measure,
                ),
                n(
                    "m",
                    NodeKind::Model,
                    &["fixed", "slow"],
                    &[],
                    CostSpec::FixedUs(0.0),
                ),
            ],
            "m".into(),
        )
        .unwrap()
    }

    #[test]
    fn declared_measured_and_input_costs() {
        let n = 100;
        let data = Dataset::new(
            vec![("x".into(), vec![0.0; n]), ("y".into(), vec![1.0; n])],
            vec![0.0; n],
        )
        .unwrap();
        let g = graph();
        // fixed costs must not be timed, so give the executor a huge one
        let ex = SimulatedExecutor::new(&g, Arc::new(data))
            .unwrap()
            .with_node_cost("slow", 1000.0)
            .with_node_cost("fixed", 1e6);
        let rows: Vec<usize> = (0..n).collect();
        let costs = measure_node_costs(&g, cost_sample(&rows), &ex, 3).unwrap();
        assert_eq!(costs["in"], 0.0);
        assert_eq!(costs["fixed"], 48.0);
        let slow = costs["slow"];
        assert!((500.0..=2000.0).contains(&slow), "{slow}");
    }

    #[test]
    fn executor_failure_names_the_node() {
        let data = Dataset::new(
            vec![("x".into(), vec![0.0]), ("y".into(), vec![1.0])],
            vec![0.0],
        )
        .unwrap();
        let g = graph();
        let ex = SimulatedExecutor::new(&g, Arc::new(data)).unwrap();
        let err = measure_node_costs(&g, &[5], &ex, 1).unwrap_err();
        assert_eq!(err.node, Some("slow".into()));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
