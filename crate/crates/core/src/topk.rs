//! Top-K query approximation.
//!
//! A cheap approximate model ranks every input, the best `r·K` survive, and
//! only those are rescored by the original model on the full feature set.
//! The filter ratio `r` is the smallest value that, over sampled holdout
//! queries, reaches the accuracy bound often enough to be trusted at 95%.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::index;
use rand::Rng as _;
use thiserror::Error;

use crate::cascade::{prepare, CascadeError, COST_TIE_TOLERANCE};
use crate::cost::{InferenceCost, NodeCosts};
use crate::data::Dataset;
use crate::executor::{ExecutorError, FeatureExecutor};
use crate::graph::{NodeId, TransformationGraph};
use crate::groups::FeatureGroup;
use crate::knapsack::select_feature_groups;
use crate::model::{ModelBundle, ModelError, TrainedModel};
use crate::stats::{wilson_interval, z_for_confidence};
use crate::{rng_for, Rng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopKError {
    #[error("empirical distribution is empty")]
    EmptyDistribution,
    #[error("distribution values must be at least 1")]
    ZeroInDistribution,
    #[error("holdout has {holdout} rows but queries may hold up to {max_n}")]
    HoldoutTooSmall { holdout: usize, max_n: usize },
    #[error("at least {min} trials are required, got {got}")]
    TooFewTrials { min: usize, got: usize },
    #[error("approximate and exact scores differ in length ({approx} vs {exact})")]
    LengthMismatch { approx: usize, exact: usize },
    #[error("accuracy bound must lie in [0, 1], got {0}")]
    BadAccuracyBound(f64),
    #[error("every budget selected an empty feature set")]
    NoCandidates,
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Training(#[from] CascadeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Executor(#[from] ExecutorError),
}

/// Minimum number of sampled queries for the success-rate estimate.
pub const MIN_TRIALS: usize = 30;

/// Observed values of K or N, sampled uniformly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalDistribution {
    values: Vec<usize>,
}

impl EmpiricalDistribution {
    pub fn new(values: Vec<usize>) -> Result<Self, TopKError> {
        if values.is_empty() {
            return Err(TopKError::EmptyDistribution);
        }
        if values.contains(&0) {
            return Err(TopKError::ZeroInDistribution);
        }
        Ok(EmpiricalDistribution { values })
    }

    pub fn constant(v: usize) -> Result<Self, TopKError> {
        Self::new(alloc::vec![v])
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<usize>() as f64 / self.values.len() as f64
    }

    pub fn min(&self) -> usize {
        *self.values.iter().min().expect("non-empty")
    }

    pub fn max(&self) -> usize {
        *self.values.iter().max().expect("non-empty")
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        self.values[rng.gen_range(0..self.values.len())]
    }
}

/// Accuracy of an approximate top-K answer against the exact one.
///
/// With both lists holding exactly `K` items, precision and recall are the
/// same overlap count divided by `K`, so both variants compute it that way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankMetric {
    #[default]
    Precision,
    Recall,
}

/// How sure the filter must be: the per-query success probability and the
/// confidence in that probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuaranteeLevel {
    pub success_rate: f64,
    pub confidence: f64,
}

impl Default for GuaranteeLevel {
    fn default() -> Self {
        GuaranteeLevel {
            success_rate: 0.95,
            confidence: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RSelection {
    pub r: usize,
    /// Largest useful ratio, ceil(max N / min K).
    pub cap: usize,
    /// No ratio below the cap met the guarantee, so the filter keeps
    /// everything the query could ask for.
    pub degraded: bool,
    pub n_trials: usize,
    /// Successful trials for each `r` in `1..=cap`.
    pub successes: Vec<u64>,
}

/// Expected per-query cost of a filter with ratio `r`:
/// `cost(S)·mean N + (cost(F) − cost(S))·r·mean K`.
pub fn expected_topk_cost(
    approx_cost_us: f64,
    full_cost_us: f64,
    mean_n: f64,
    mean_k: f64,
    r: f64,
) -> f64 {
    approx_cost_us * mean_n + (full_cost_us - approx_cost_us) * r * mean_k
}

fn by_score_desc(scores: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// Smallest ratio at which one sampled query meets the bound, or `None` if
/// the bound is unreachable.
fn required_ratio(
    sample: &[usize],
    k: usize,
    approx: &[f64],
    exact: &[f64],
    bound: f64,
) -> Option<usize> {
    let mut by_exact = sample.to_vec();
    by_exact.sort_by(by_score_desc(exact));
    let truth: BTreeSet<usize> = by_exact[..k].iter().copied().collect();

    let mut by_approx = sample.to_vec();
    by_approx.sort_by(by_score_desc(approx));
    let positions: Vec<usize> = by_approx
        .iter()
        .enumerate()
        .filter(|(_, i)| truth.contains(i))
        .map(|(p, _)| p)
        .collect();

    let needed = (0..=k).find(|&m| m as f64 / k as f64 >= bound)?;
    if needed == 0 {
        return Some(1);
    }
    let prefix = positions[needed - 1] + 1;
    Some(prefix.div_ceil(k).max(1))
}

/// Picks the filter ratio from approximate and exact holdout scores.
///
/// Each trial samples `K` and `N`, draws `N` holdout rows without replacement
/// and records the smallest ratio that meets `accuracy_bound` for that query.
/// All ratios are judged on the same trials. The result is the smallest `r`
/// whose Wilson lower bound on the success rate exceeds
/// `guarantee.success_rate`.
#[allow(clippy::too_many_arguments)]
pub fn choose_r(
    approx: &[f64],
    exact: &[f64],
    k_dist: &EmpiricalDistribution,
    n_dist: &EmpiricalDistribution,
    metric: RankMetric,
    accuracy_bound: f64,
    guarantee: GuaranteeLevel,
    n_trials: usize,
    seed: u64,
) -> Result<RSelection, TopKError> {
    let _ = metric;
    if approx.len() != exact.len() {
        return Err(TopKError::LengthMismatch {
            approx: approx.len(),
            exact: exact.len(),
        });
    }
    if !(0.0..=1.0).contains(&accuracy_bound) {
        return Err(TopKError::BadAccuracyBound(accuracy_bound));
    }
    if n_trials < MIN_TRIALS {
        return Err(TopKError::TooFewTrials {
            min: MIN_TRIALS,
            got: n_trials,
        });
    }
    if approx.len() < n_dist.max() {
        return Err(TopKError::HoldoutTooSmall {
            holdout: approx.len(),
            max_n: n_dist.max(),
        });
    }
    let cap = n_dist.max().div_ceil(k_dist.min()).max(1);

    let mut rng = rng_for(seed, 0x70_0000);
    let mut required = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let k = k_dist.sample(&mut rng);
        let n = n_dist.sample(&mut rng);
        let sample = index::sample(&mut rng, approx.len(), n).into_vec();
        required.push(required_ratio(
            &sample,
            k.min(n),
            approx,
            exact,
            accuracy_bound,
        ));
    }

    let z = z_for_confidence(guarantee.confidence);
    let successes: Vec<u64> = (1..=cap)
        .map(|r| {
            required
                .iter()
                .filter(|q| q.is_some_and(|q| q <= r))
                .count() as u64
        })
        .collect();
    let chosen = successes
        .iter()
        .position(|&s| wilson_interval(s, n_trials as u64, z).0 > guarantee.success_rate)
        .map(|i| i + 1);
    let (r, degraded) = match chosen {
        Some(r) => (r, r == cap && cap > 1),
        None => (cap, true),
    };
    Ok(RSelection {
        r,
        cap,
        degraded,
        n_trials,
        successes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopKOptions {
    pub k_dist: EmpiricalDistribution,
    pub n_dist: EmpiricalDistribution,
    pub metric: RankMetric,
    pub accuracy_bound: f64,
    pub guarantee: GuaranteeLevel,
    pub n_trials: usize,
    pub holdout_fraction: f64,
    pub n_shuffles: usize,
    pub budget_steps: usize,
    pub seed: u64,
}

impl TopKOptions {
    pub fn new(k_dist: EmpiricalDistribution, n_dist: EmpiricalDistribution) -> Self {
        TopKOptions {
            k_dist,
            n_dist,
            metric: RankMetric::Precision,
            accuracy_bound: 0.95,
            guarantee: GuaranteeLevel::default(),
            n_trials: 100,
            holdout_fraction: 0.25,
            n_shuffles: 3,
            budget_steps: 10,
            seed: 0,
        }
    }
}

/// Summary of one evaluated budget.
#[derive(Debug, Clone, PartialEq)]
pub struct TopKCandidate {
    pub budget_us: f64,
    pub selected_groups: BTreeSet<usize>,
    pub selection: RSelection,
    pub approx_cost_us: f64,
    pub expected_cost_us: f64,
}

#[derive(Debug, Clone)]
pub struct TopKConfig {
    pub groups: Vec<FeatureGroup>,
    pub candidates: Vec<TopKCandidate>,
    pub selected_groups: BTreeSet<usize>,
    pub approx_nodes: Vec<NodeId>,
    pub remaining_nodes: Vec<NodeId>,
    pub approximate_model: TrainedModel,
    pub original_model: TrainedModel,
    pub r: usize,
    pub degraded: bool,
    pub metric: RankMetric,
    pub accuracy_bound: f64,
    pub approx_cost_us: f64,
    pub full_cost_us: f64,
    /// Per-query cost of the chosen filter.
    pub expected_cost_us: f64,
    /// Per-query cost of ranking everything with the full pipeline.
    pub baseline_cost_us: f64,
    pub k_dist: EmpiricalDistribution,
    pub n_dist: EmpiricalDistribution,
}

/// Trains a top-K filter.
pub fn train_topk(
    graph: &TransformationGraph,
    data: &Dataset,
    bundle: &dyn ModelBundle,
    node_costs: &NodeCosts,
    options: &TopKOptions,
    inference_cost: &dyn InferenceCost,
) -> Result<TopKConfig, TopKError> {
    let holdout_rows = {
        let (_, h) = data
            .split_indices(options.holdout_fraction, options.seed)
            .map_err(CascadeError::from)?;
        h.len()
    };
    if holdout_rows < options.n_dist.max() {
        return Err(TopKError::HoldoutTooSmall {
            holdout: holdout_rows,
            max_n: options.n_dist.max(),
        });
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
    let holdout_x = prep
        .original
        .project(&prep.holdout)
        .map_err(CascadeError::from)?;
    let exact = bundle.rank_scores(&prep.original, &holdout_x)?;
    let full_cost =
        prep.table.full_cost_us() + inference_cost.per_row_us(bundle, &prep.original, &holdout_x);
    let mean_n = options.n_dist.mean();
    let mean_k = options.k_dist.mean();

    struct Best {
        selected: BTreeSet<usize>,
        model: TrainedModel,
        selection: RSelection,
        approx_cost: f64,
        expected: f64,
    }
    let mut best: Option<Best> = None;
    let mut candidates: Vec<TopKCandidate> = Vec::new();
    let mut seen: BTreeMap<BTreeSet<usize>, usize> = BTreeMap::new();

    for budget in prep.budgets(options.budget_steps) {
        let selected = select_feature_groups(&prep.groups, &prep.table, budget);
        if selected.is_empty() {
            continue;
        }
        if let Some(&i) = seen.get(&selected) {
            let mut repeat = candidates[i].clone();
            repeat.budget_us = budget;
            candidates.push(repeat);
            continue;
        }
        seen.insert(selected.clone(), candidates.len());

        let columns = prep.columns_of(graph, &selected);
        let model = bundle.train_on(&prep.train, &columns)?;
        let approx_x = model.project(&prep.holdout).map_err(CascadeError::from)?;
        let approx = bundle.rank_scores(&model, &approx_x)?;
        let selection = choose_r(
            &approx,
            &exact,
            &options.k_dist,
            &options.n_dist,
            options.metric,
            options.accuracy_bound,
            options.guarantee,
            options.n_trials,
            options.seed,
        )?;
        let ids: Vec<usize> = selected.iter().copied().collect();
        let approx_cost =
            prep.table.cost_of(&ids) + inference_cost.per_row_us(bundle, &model, &approx_x);
        let expected =
            expected_topk_cost(approx_cost, full_cost, mean_n, mean_k, selection.r as f64);
        candidates.push(TopKCandidate {
            budget_us: budget,
            selected_groups: selected.clone(),
            selection: selection.clone(),
            approx_cost_us: approx_cost,
            expected_cost_us: expected,
        });

        let better = match &best {
            None => true,
            Some(b) if b.selection.degraded != selection.degraded => !selection.degraded,
            Some(b) => {
                let tol = COST_TIE_TOLERANCE * full_cost.abs() * mean_n;
                expected < b.expected - tol
                    || (expected <= b.expected + tol && approx_cost < b.approx_cost)
            }
        };
        if better {
            best = Some(Best {
                selected,
                model,
                selection,
                approx_cost,
                expected,
            });
        }
    }

    let b = best.ok_or(TopKError::NoCandidates)?;
    let (approx_nodes, remaining_nodes) = prep.node_split(&b.selected);
    Ok(TopKConfig {
        groups: prep.groups,
        candidates,
        selected_groups: b.selected,
        approx_nodes,
        remaining_nodes,
        approximate_model: b.model,
        original_model: prep.original,
        r: b.selection.r,
        degraded: b.selection.degraded,
        metric: options.metric,
        accuracy_bound: options.accuracy_bound,
        approx_cost_us: b.approx_cost,
        full_cost_us: full_cost,
        expected_cost_us: b.expected,
        baseline_cost_us: full_cost * mean_n,
        k_dist: options.k_dist.clone(),
        n_dist: options.n_dist.clone(),
    })
}

/// The `k` highest-ranked rows according to `scores`, ties to the lower row id.
pub fn top_rows(rows: &[usize], scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(rows[a].cmp(&rows[b])));
    order.truncate(k);
    order.into_iter().map(|i| rows[i]).collect()
}

/// Answers a top-K query over `rows` with the trained filter.
///
/// Returns row ids in descending order of the original model's score.
pub fn query_topk(
    config: &TopKConfig,
    bundle: &dyn ModelBundle,
    executor: &dyn FeatureExecutor,
    rows: &[usize],
    k: usize,
) -> Result<Vec<usize>, TopKError> {
    if k == 0 {
        return Err(TopKError::ZeroK);
    }
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let approx_cols = executor.run(&config.approx_nodes, rows)?;
    let approx_x = approx_cols.matrix(config.approximate_model.feature_columns(), rows.len())?;
    let approx = bundle.rank_scores(&config.approximate_model, &approx_x)?;

    let keep = config.r.saturating_mul(k).min(rows.len());
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| approx[b].total_cmp(&approx[a]).then(rows[a].cmp(&rows[b])));
    order.truncate(keep);
    order.sort_unstable();

    let kept_rows: Vec<usize> = order.iter().map(|&i| rows[i]).collect();
    let mut columns = approx_cols.select(&order);
    columns.extend(executor.run(&config.remaining_nodes, &kept_rows)?);
    let full_x = columns.matrix(config.original_model.feature_columns(), kept_rows.len())?;
    let exact = bundle.rank_scores(&config.original_model, &full_x)?;
    Ok(top_rows(&kept_rows, &exact, k))
}

/// Exact top-K: every row through the full pipeline.
pub fn exact_topk(
    model: &TrainedModel,
    nodes: &[NodeId],
    bundle: &dyn ModelBundle,
    executor: &dyn FeatureExecutor,
    rows: &[usize],
    k: usize,
) -> Result<Vec<usize>, TopKError> {
    if k == 0 {
        return Err(TopKError::ZeroK);
    }
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let columns = executor.run(nodes, rows)?;
    let x = columns.matrix(model.feature_columns(), rows.len())?;
    let scores = bundle.rank_scores(model, &x)?;
    Ok(top_rows(rows, &scores, k))
}

/// Overlap between an approximate and an exact answer, divided by `k`.
pub fn topk_accuracy(approx: &[usize], exact: &[usize], k: usize) -> f64 {
    let truth: BTreeSet<usize> = exact.iter().copied().collect();
    approx.iter().filter(|i| truth.contains(i)).count() as f64 / k as f64
}
