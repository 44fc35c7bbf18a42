mod common;

use common::{node, planted_data, planted_graph, TableExecutor};
use featcascade_core::cascade::CascadeConfig;
use featcascade_core::cost::declared_node_costs;
use featcascade_core::{
    builtin_linear_regression, builtin_logistic_regression, expected_cascade_cost,
    predict_cascaded, predict_full, train_cascade, AccuracyTarget, CascadeError, CascadeOptions,
    Dataset, ModelBundle, NoCascadeReason, NoInferenceCost, NodeKind, TransformationGraph,
};

fn trained(data: &Dataset, seed: u64) -> CascadeConfig {
    let g = planted_graph();
    let opts = CascadeOptions {
        seed,
        ..CascadeOptions::default()
    };
    let out = train_cascade(
        &g,
        data,
        &builtin_logistic_regression(),
        &declared_node_costs(&g),
        &opts,
        &NoInferenceCost,
    )
    .unwrap();
    *out.result.expect("planted workload cascades")
}

#[test]
fn planted_workload_yields_a_cheap_cascade() {
    let data = planted_data(4000, 1);
    let cfg = trained(&data, 1);
    assert_eq!(cfg.selected_groups.iter().copied().collect::<Vec<_>>(), [0]);
    assert!(
        cfg.holdout_approx_fraction >= 0.7,
        "{}",
        cfg.holdout_approx_fraction
    );
    assert!(cfg.expected_cost_us <= 0.5 * cfg.full_cost_us);
    assert_eq!(cfg.full_cost_us, 100.0);
    assert_eq!(cfg.approx_cost_us, 10.0);
    assert_eq!(cfg.expected_cost_us, cfg.recomputed_expected_cost());
    assert_eq!(
        cfg.expected_cost_us,
        expected_cascade_cost(cfg.holdout_approx_fraction, 10.0, 100.0)
    );
    assert!((0.5..=1.0).contains(&cfg.threshold));
    assert!(cfg.cascade_holdout_score >= cfg.accuracy_target);
    assert!((cfg.accuracy_target - (cfg.original_holdout_score - 0.001)).abs() < 1e-12);
    assert_eq!(cfg.approx_nodes, ["in".into(), "cheap".into()]);
    assert_eq!(cfg.remaining_nodes, ["dear".into()]);
}

#[test]
fn cascade_reproduces_its_holdout_score() {
    let data = planted_data(4000, 2);
    let cfg = trained(&data, 2);
    let (_, holdout) = data.split_indices(0.25, 2).unwrap();
    let ex = TableExecutor::new(&planted_graph(), &data);
    let b = builtin_logistic_regression();
    let pred = predict_cascaded(&cfg, &b, &ex, &holdout).unwrap();
    let labels: Vec<f64> = holdout.iter().map(|&r| data.labels()[r]).collect();
    assert_eq!(b.score(&pred, &labels), cfg.cascade_holdout_score);
}

#[test]
fn fresh_data_keeps_accuracy() {
    let cfg = trained(&planted_data(4000, 3), 3);
    let fresh = planted_data(3000, 303);
    let rows: Vec<usize> = (0..fresh.row_count()).collect();
    let ex = TableExecutor::new(&planted_graph(), &fresh);
    let b = builtin_logistic_regression();
    let pred = predict_cascaded(&cfg, &b, &ex, &rows).unwrap();
    let acc = b.score(&pred, fresh.labels());
    assert!(
        acc >= cfg.accuracy_target - 0.02,
        "{acc} vs {}",
        cfg.accuracy_target
    );
}

#[test]
fn degenerate_thresholds() {
    let data = planted_data(2000, 4);
    let mut cfg = trained(&data, 4);
    let rows: Vec<usize> = (0..500).collect();
    let g = planted_graph();
    let ex = TableExecutor::new(&g, &data);
    let b = builtin_logistic_regression();

    cfg.threshold = -1.0;
    let approx_x = data.select_rows(&rows).unwrap();
    let approx_only = b
        .predict(
            &cfg.approximate_model,
            &cfg.approximate_model.project(&approx_x).unwrap(),
        )
        .unwrap();
    assert_eq!(predict_cascaded(&cfg, &b, &ex, &rows).unwrap(), approx_only);

    cfg.threshold = 1.0;
    let all: Vec<_> = ["in", "cheap", "dear"]
        .into_iter()
        .map(Into::into)
        .collect();
    let full = predict_full(&cfg.original_model, &all, &b, &ex, &rows).unwrap();
    assert_eq!(predict_cascaded(&cfg, &b, &ex, &rows).unwrap(), full);
    assert!(predict_cascaded(&cfg, &b, &ex, &[]).unwrap().is_empty());
}

#[test]
fn training_is_deterministic() {
    let data = planted_data(2000, 5);
    let a = trained(&data, 9);
    let b = trained(&data, 9);
    assert_eq!(a.threshold, b.threshold);
    assert_eq!(a.holdout_approx_fraction, b.holdout_approx_fraction);
    assert_eq!(a.selected_groups, b.selected_groups);
}

#[test]
fn single_group_pipeline_cannot_save() {
    let cols = vec!["c0".to_owned(), "e0".to_owned()];
    let g = TransformationGraph::new(
        vec![
            node("in", NodeKind::Input, &[], &[], 0.0),
            node("both", NodeKind::Transform, &["in"], &cols, 50.0),
            node("m", NodeKind::Model, &["both"], &[], 0.0),
        ],
        "m".into(),
    )
    .unwrap();
    let data = planted_data(1000, 6);
    let data = Dataset::new(
        cols.iter()
            .map(|c| (c.clone(), data.column(c).unwrap().to_vec()))
            .collect(),
        data.labels().to_vec(),
    )
    .unwrap();
    let out = train_cascade(
        &g,
        &data,
        &builtin_logistic_regression(),
        &declared_node_costs(&g),
        &CascadeOptions::default(),
        &NoInferenceCost,
    )
    .unwrap();
    assert_eq!(out.result.unwrap_err(), NoCascadeReason::NoSavings);
    assert_eq!(out.groups.len(), 1);
}

#[test]
fn impossible_target_is_infeasible_everywhere() {
    let g = planted_graph();
    let opts = CascadeOptions {
        target: AccuracyTarget::Absolute(1.01),
        ..CascadeOptions::default()
    };
    let out = train_cascade(
        &g,
        &planted_data(1000, 7),
        &builtin_logistic_regression(),
        &declared_node_costs(&g),
        &opts,
        &NoInferenceCost,
    )
    .unwrap();
    assert_eq!(out.result.unwrap_err(), NoCascadeReason::Infeasible);
    assert_eq!(out.candidates.len(), 10);
    assert!(out.candidates.iter().all(|c| c.threshold.is_none()));
}

#[test]
fn regression_is_rejected() {
    let g = planted_graph();
    let err = train_cascade(
        &g,
        &planted_data(200, 8),
        &builtin_linear_regression(),
        &declared_node_costs(&g),
        &CascadeOptions::default(),
        &NoInferenceCost,
    )
    .unwrap_err();
    assert_eq!(err, CascadeError::Regression);
    assert_eq!(err.to_string(), "regression cannot be cascaded");
}
