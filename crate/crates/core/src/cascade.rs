//! End-to-end cascades: an approximate model trained on a cheap subset of
//! feature groups answers the inputs it is confident about, and everything
//! else falls through to the original model on the full feature set.
//!
//! Training sweeps a ladder of cost budgets. For each budget the knapsack
//! picks the most important affordable groups, an approximate model of the
//! same class is trained on them, a confidence threshold is calibrated on
//! holdout data against the accuracy target, and the expected per-row cost
//! `h·cost(S) + (1 − h)·cost(F)` is evaluated. The cheapest candidate wins.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::cost::{InferenceCost, NodeCosts};
use crate::data::{DataError, Dataset};
use crate::executor::{ColumnBatch, ExecutorError, FeatureExecutor};
use crate::graph::{NodeId, TransformationGraph};
use crate::groups::{
    identify_feature_groups, permutation_importance, FeatureGroup, GroupCostTable, GroupError,
};
use crate::knapsack::select_feature_groups;
use crate::model::{ModelBundle, ModelError, Task, TrainedModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CascadeError {
    #[error("regression cannot be cascaded")]
    Regression,
    #[error("pipeline has no feature columns")]
    NoFeatures,
    #[error("no calibration records")]
    EmptyRecords,
    #[error("accuracy target {target} is infeasible: the original model scores {original_score} on holdout")]
    Infeasible { target: f64, original_score: f64 },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Executor(#[from] ExecutorError),
}

/// One holdout row scored by both models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRecord {
    pub approx_prediction: f64,
    pub original_prediction: f64,
    pub approx_confidence: f64,
    pub label: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdChoice {
    /// Rows with confidence strictly above this use the approximate model.
    pub threshold: f64,
    /// Fraction of calibration rows the approximate model answers.
    pub approx_fraction: f64,
    /// Score of the mixed predictions at this threshold.
    pub score: f64,
}

/// Value below every confidence, meaning "always use the approximate model".
fn sentinel_below(min_confidence: f64) -> f64 {
    [0.5, 0.0, -1.0]
        .into_iter()
        .find(|&s| s < min_confidence)
        .unwrap_or(min_confidence - 1.0)
}

/// Lowest candidate threshold whose mixed predictions reach `target`.
///
/// Candidates are the distinct confidences plus a sentinel below all of them.
/// Row `i` takes the approximate prediction iff its confidence is strictly
/// greater than the threshold.
pub fn cascade_threshold(
    records: &[CalibrationRecord],
    bundle: &dyn ModelBundle,
    target: f64,
) -> Result<ThresholdChoice, CascadeError> {
    if records.is_empty() {
        return Err(CascadeError::EmptyRecords);
    }
    let labels: Vec<f64> = records.iter().map(|r| r.label).collect();
    let mut confidences: Vec<f64> = records.iter().map(|r| r.approx_confidence).collect();
    confidences.sort_by(f64::total_cmp);
    confidences.dedup();

    let mut candidates = Vec::with_capacity(confidences.len() + 1);
    candidates.push(sentinel_below(confidences[0]));
    candidates.extend_from_slice(&confidences);

    let mut mixed = Vec::with_capacity(records.len());
    for &t in &candidates {
        mixed.clear();
        let mut approximated = 0usize;
        for r in records {
            if r.approx_confidence > t {
                approximated += 1;
                mixed.push(r.approx_prediction);
            } else {
                mixed.push(r.original_prediction);
            }
        }
        let score = bundle.score(&mixed, &labels);
        if score >= target {
            return Ok(ThresholdChoice {
                threshold: t,
                approx_fraction: approximated as f64 / records.len() as f64,
                score,
            });
        }
    }
    let original: Vec<f64> = records.iter().map(|r| r.original_prediction).collect();
    Err(CascadeError::Infeasible {
        target,
        original_score: bundle.score(&original, &labels),
    })
}

/// Expected per-row cost of a cascade answering fraction `h` approximately.
pub fn expected_cascade_cost(h: f64, approx_cost_us: f64, full_cost_us: f64) -> f64 {
    h * approx_cost_us + (1.0 - h) * full_cost_us
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AccuracyTarget {
    /// Absolute holdout score the cascade must reach.
    Absolute(f64),
    /// Original model's holdout score minus this amount.
    BelowOriginal(f64),
}

impl Default for AccuracyTarget {
    fn default() -> Self {
        AccuracyTarget::BelowOriginal(0.001)
    }
}

impl AccuracyTarget {
    pub fn resolve(self, original_score: f64) -> f64 {
        match self {
            AccuracyTarget::Absolute(a) => a,
            AccuracyTarget::BelowOriginal(delta) => original_score - delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeOptions {
    pub target: AccuracyTarget,
    pub holdout_fraction: f64,
    pub n_shuffles: usize,
    /// Budgets are `i / budget_steps · cost(F)` for `i = 1..=budget_steps`.
    pub budget_steps: usize,
    pub seed: u64,
}

impl Default for CascadeOptions {
    fn default() -> Self {
        CascadeOptions {
            target: AccuracyTarget::default(),
            holdout_fraction: 0.25,
            n_shuffles: 3,
            budget_steps: 10,
            seed: 0,
        }
    }
}

/// Expected costs within this fraction of cost(F) count as tied; ties go to
/// the cheaper approximate feature set.
pub const COST_TIE_TOLERANCE: f64 = 1e-3;

/// A trained two-level cascade.
#[derive(Debug, Clone)]
pub struct CascadeConfig {
    pub selected_groups: BTreeSet<usize>,
    /// Nodes computing the selected groups, in execution order.
    pub approx_nodes: Vec<NodeId>,
    /// The other non-model nodes, in execution order.
    pub remaining_nodes: Vec<NodeId>,
    pub approximate_model: TrainedModel,
    pub original_model: TrainedModel,
    pub threshold: f64,
    /// h_S: holdout fraction answered by the approximate model.
    pub holdout_approx_fraction: f64,
    /// cost(S), including approximate-model inference.
    pub approx_cost_us: f64,
    /// cost(F), including original-model inference.
    pub full_cost_us: f64,
    pub expected_cost_us: f64,
    pub accuracy_target: f64,
    pub original_holdout_score: f64,
    pub cascade_holdout_score: f64,
}

impl CascadeConfig {
    pub fn recomputed_expected_cost(&self) -> f64 {
        expected_cascade_cost(
            self.holdout_approx_fraction,
            self.approx_cost_us,
            self.full_cost_us,
        )
    }

    /// cost(F) / p_t.
    pub fn predicted_speedup(&self) -> f64 {
        self.full_cost_us / self.expected_cost_us
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoCascadeReason {
    /// The cheapest feasible cascade is no cheaper than the full pipeline.
    NoSavings,
    /// No candidate could reach the accuracy target.
    Infeasible,
    /// Every budget selected an empty feature set.
    NoCandidates,
}

/// Summary of one evaluated budget.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSummary {
    pub budget_us: f64,
    pub selected_groups: BTreeSet<usize>,
    /// `None` when the target was infeasible for this set.
    pub threshold: Option<ThresholdChoice>,
    pub approx_cost_us: f64,
    pub expected_cost_us: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CascadeOutcome {
    pub groups: Vec<FeatureGroup>,
    pub candidates: Vec<CandidateSummary>,
    pub original_holdout_score: f64,
    pub accuracy_target: f64,
    pub full_cost_us: f64,
    pub result: Result<Box<CascadeConfig>, NoCascadeReason>,
}

/// Shared front half of cascade and top-K training: split, groups,
/// original model, importances.
pub(crate) struct Prepared {
    pub train: Dataset,
    pub holdout: Dataset,
    pub groups: Vec<FeatureGroup>,
    pub table: GroupCostTable,
    pub original: TrainedModel,
    pub order: Vec<NodeId>,
}

pub(crate) fn prepare(
    graph: &TransformationGraph,
    data: &Dataset,
    bundle: &dyn ModelBundle,
    node_costs: &NodeCosts,
    holdout_fraction: f64,
    n_shuffles: usize,
    seed: u64,
) -> Result<Prepared, CascadeError> {
    let features = graph.feature_columns();
    if features.is_empty() {
        return Err(CascadeError::NoFeatures);
    }
    let (train, holdout) = data.train_holdout_split(holdout_fraction, seed)?;
    let mut groups = identify_feature_groups(graph, node_costs)?;
    let table = GroupCostTable::new(graph, &groups, node_costs)?;
    let original = bundle.train_on(&train, features)?;
    for g in &mut groups {
        g.importance = permutation_importance(g, bundle, &original, &holdout, n_shuffles, seed)?;
    }
    let model_id = &graph.model_node().id;
    let order = graph
        .sort_minimizing_transitions()
        .order
        .into_iter()
        .filter(|n| n != model_id)
        .collect();
    Ok(Prepared {
        train,
        holdout,
        groups,
        table,
        original,
        order,
    })
}

/// Feature groups with costs and permutation importances, computed exactly
/// as training does: split, train the original model, shuffle each group.
pub fn analyze_groups(
    graph: &TransformationGraph,
    data: &Dataset,
    bundle: &dyn ModelBundle,
    node_costs: &NodeCosts,
    holdout_fraction: f64,
    n_shuffles: usize,
    seed: u64,
) -> Result<Vec<FeatureGroup>, CascadeError> {
    Ok(prepare(
        graph,
        data,
        bundle,
        node_costs,
        holdout_fraction,
        n_shuffles,
        seed,
    )?
    .groups)
}

impl Prepared {
    /// Budget ladder over feature cost(F).
    pub fn budgets(&self, steps: usize) -> Vec<f64> {
        let full = self.table.full_cost_us();
        (1..=steps)
            .map(|i| i as f64 / steps as f64 * full)
            .collect()
    }

    pub fn columns_of(
        &self,
        graph: &TransformationGraph,
        selected: &BTreeSet<usize>,
    ) -> Vec<String> {
        let members: BTreeSet<&String> = selected
            .iter()
            .flat_map(|&g| self.groups[g].columns.iter())
            .collect();
        graph
            .feature_columns()
            .iter()
            .filter(|c| members.contains(c))
            .cloned()
            .collect()
    }

    /// (approximate-path nodes, remaining nodes), both in execution order.
    pub fn node_split(&self, selected: &BTreeSet<usize>) -> (Vec<NodeId>, Vec<NodeId>) {
        let ids: Vec<usize> = selected.iter().copied().collect();
        let approx = self.table.nodes_of(&ids);
        self.order.iter().cloned().partition(|n| approx.contains(n))
    }
}

/// Trains a cascade for a classification pipeline.
///
/// Returns an outcome whose `result` is the cheapest cascade, or the reason
/// no cascade beats running the full pipeline.
pub fn train_cascade(
    graph: &TransformationGraph,
    data: &Dataset,
    bundle: &dyn ModelBundle,
    node_costs: &NodeCosts,
    options: &CascadeOptions,
    inference_cost: &dyn InferenceCost,
) -> Result<CascadeOutcome, CascadeError> {
    if bundle.task() == Task::Regression {
        return Err(CascadeError::Regression);
    }
    let prep = prepare(
        graph,
        data,
        bundle,
        node_costs,
        options.holdout_fraction,
        options.n_shuffles,
        options.seed,
    )?;

    let holdout_x = prep.original.project(&prep.holdout)?;
    let original_pred = bundle.predict(&prep.original, &holdout_x)?;
    let original_score = bundle.score(&original_pred, prep.holdout.labels());
    let target = options.target.resolve(original_score);
    let full_cost =
        prep.table.full_cost_us() + inference_cost.per_row_us(bundle, &prep.original, &holdout_x);

    struct Best {
        selected: BTreeSet<usize>,
        model: TrainedModel,
        choice: ThresholdChoice,
        approx_cost: f64,
        expected: f64,
    }
    let mut best: Option<Best> = None;
    let mut candidates: Vec<CandidateSummary> = Vec::new();
    let mut seen: BTreeMap<BTreeSet<usize>, usize> = BTreeMap::new();

    for budget in prep.budgets(options.budget_steps) {
        let selected = select_feature_groups(&prep.groups, &prep.table, budget);
        if selected.is_empty() {
            continue;
        }
        if let Some(&i) = seen.get(&selected) {
            let mut repeat: CandidateSummary = candidates[i].clone();
            repeat.budget_us = budget;
            candidates.push(repeat);
            continue;
        }
        seen.insert(selected.clone(), candidates.len());

        let columns = prep.columns_of(graph, &selected);
        let model = bundle.train_on(&prep.train, &columns)?;
        let approx_x = model.project(&prep.holdout)?;
        let approx_pred = bundle.predict(&model, &approx_x)?;
        let approx_conf = bundle.confidence(&model, &approx_x)?;
        let records: Vec<CalibrationRecord> = (0..prep.holdout.row_count())
            .map(|i| CalibrationRecord {
                approx_prediction: approx_pred[i],
                original_prediction: original_pred[i],
                approx_confidence: approx_conf[i],
                label: prep.holdout.labels()[i],
            })
            .collect();
        let ids: Vec<usize> = selected.iter().copied().collect();
        let approx_cost =
            prep.table.cost_of(&ids) + inference_cost.per_row_us(bundle, &model, &approx_x);

        let choice = match cascade_threshold(&records, bundle, target) {
            Ok(c) => Some(c),
            Err(CascadeError::Infeasible { .. }) => None,
            Err(e) => return Err(e),
        };
        let expected =
            choice.map(|c| expected_cascade_cost(c.approx_fraction, approx_cost, full_cost));
        candidates.push(CandidateSummary {
            budget_us: budget,
            selected_groups: selected.clone(),
            threshold: choice,
            approx_cost_us: approx_cost,
            expected_cost_us: expected,
        });
        let (Some(choice), Some(expected)) = (choice, expected) else {
            continue;
        };

        let better = match &best {
            None => true,
            Some(b) => {
                let tol = COST_TIE_TOLERANCE * full_cost.abs();
                expected < b.expected - tol
                    || (expected <= b.expected + tol && approx_cost < b.approx_cost)
            }
        };
        if better {
            best = Some(Best {
                selected,
                model,
                choice,
                approx_cost,
                expected,
            });
        }
    }

    let result = match best {
        None if !candidates.is_empty() => Err(NoCascadeReason::Infeasible),
        None => Err(NoCascadeReason::NoCandidates),
        Some(b) if b.expected >= full_cost => Err(NoCascadeReason::NoSavings),
        Some(b) => {
            let (approx_nodes, remaining_nodes) = prep.node_split(&b.selected);
            Ok(Box::new(CascadeConfig {
                selected_groups: b.selected,
                approx_nodes,
                remaining_nodes,
                approximate_model: b.model,
                original_model: prep.original.clone(),
                threshold: b.choice.threshold,
                holdout_approx_fraction: b.choice.approx_fraction,
                approx_cost_us: b.approx_cost,
                full_cost_us: full_cost,
                expected_cost_us: b.expected,
                accuracy_target: target,
                original_holdout_score: original_score,
                cascade_holdout_score: b.choice.score,
            }))
        }
    };

    Ok(CascadeOutcome {
        groups: prep.groups,
        candidates,
        original_holdout_score: original_score,
        accuracy_target: target,
        full_cost_us: full_cost,
        result,
    })
}

/// Cascaded inference over a batch of raw input rows.
///
/// All rows go through the approximate path; rows whose confidence does not
/// exceed the threshold then compute the remaining features together and are
/// answered by the original model.
pub fn predict_cascaded(
    config: &CascadeConfig,
    bundle: &dyn ModelBundle,
    executor: &dyn FeatureExecutor,
    rows: &[usize],
) -> Result<Vec<f64>, CascadeError> {
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let approx_cols = executor.run(&config.approx_nodes, rows)?;
    let approx_x = approx_cols.matrix(config.approximate_model.feature_columns(), rows.len())?;
    let mut out = bundle.predict(&config.approximate_model, &approx_x)?;
    let confidence = bundle.confidence(&config.approximate_model, &approx_x)?;

    let hard: Vec<usize> = (0..rows.len())
        .filter(|&i| confidence[i] <= config.threshold)
        .collect();
    if hard.is_empty() {
        return Ok(out);
    }
    let hard_rows: Vec<usize> = hard.iter().map(|&i| rows[i]).collect();
    let mut columns: ColumnBatch = approx_cols.select(&hard);
    columns.extend(executor.run(&config.remaining_nodes, &hard_rows)?);
    let full_x = columns.matrix(config.original_model.feature_columns(), hard.len())?;
    let full = bundle.predict(&config.original_model, &full_x)?;
    for (&i, p) in hard.iter().zip(full) {
        out[i] = p;
    }
    Ok(out)
}

/// Non-cascaded inference: every node, then the original model.
pub fn predict_full(
    model: &TrainedModel,
    nodes: &[NodeId],
    bundle: &dyn ModelBundle,
    executor: &dyn FeatureExecutor,
    rows: &[usize],
) -> Result<Vec<f64>, CascadeError> {
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let columns = executor.run(nodes, rows)?;
    let x = columns.matrix(model.feature_columns(), rows.len())?;
    Ok(bundle.predict(model, &x)?)
}
