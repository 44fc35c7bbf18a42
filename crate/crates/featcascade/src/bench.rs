//! Throughput and latency measurement of optimized pipelines against
//! running every feature node.

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use featcascade_core::cascade::{predict_cascaded, predict_full, CascadeConfig, CascadeError};
use featcascade_core::topk::{exact_topk, query_topk, topk_accuracy, TopKConfig};
use featcascade_core::{
    rng_for, EmpiricalDistribution, FeatureExecutor, ModelBundle, NodeId, TopKError, TrainedModel,
    TransformationGraph,
};
use rand::seq::index;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BenchMode {
    Batch,
    Point,
    Topk,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    TopK(#[from] TopKError),
    #[error("no rows to benchmark")]
    NoRows,
    #[error("top-k benchmarks need K and N distributions")]
    NoDistributions,
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    /// Whole-set calls per side in batch mode.
    pub repetitions: usize,
    /// Single-row calls per side in point mode; at least 100 are made.
    pub point_queries: usize,
    pub topk_queries: usize,
    pub seed: u64,
    /// Used by top-K runs without a trained filter.
    pub k_dist: Option<EmpiricalDistribution>,
    pub n_dist: Option<EmpiricalDistribution>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            repetitions: 5,
            point_queries: 1000,
            topk_queries: 20,
            seed: 0,
            k_dist: None,
            n_dist: None,
        }
    }
}

pub const MIN_POINT_QUERIES: usize = 100;

#[derive(Debug, Clone, Serialize)]
pub struct RunStats {
    pub label: String,
    pub queries: usize,
    pub rows: usize,
    pub total_s: f64,
    pub throughput_rows_per_s: f64,
    pub p50_us: f64,
    pub p99_us: f64,
    /// Classification accuracy, or mean top-K precision against exact answers.
    pub accuracy: f64,
    #[serde(skip)]
    pub latencies_us: Vec<f64>,
}

/// Baseline over optimized: values above 1 mean the optimized run is better.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Ratios {
    pub throughput: f64,
    pub p50_latency: f64,
    pub p99_latency: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub mode: BenchMode,
    pub optimized: RunStats,
    pub baseline: RunStats,
    pub ratios: Ratios,
    /// Top-K only: fraction of queries meeting the precision bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success_fraction: Option<f64>,
    pub config: serde_json::Value,
    /// Predictions of the optimized run, one per benchmarked row.
    #[serde(skip)]
    pub predictions: Vec<f64>,
}

/// Nearest-rank percentile.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn stats(label: &str, rows: usize, mut latencies_us: Vec<f64>, accuracy: f64) -> RunStats {
    let total_us: f64 = latencies_us.iter().sum();
    let raw = latencies_us.clone();
    latencies_us.sort_by(f64::total_cmp);
    RunStats {
        label: label.to_owned(),
        queries: raw.len(),
        rows,
        total_s: total_us * 1e-6,
        throughput_rows_per_s: if total_us > 0.0 {
            rows as f64 / (total_us * 1e-6)
        } else {
            0.0
        },
        p50_us: percentile(&latencies_us, 50.0),
        p99_us: percentile(&latencies_us, 99.0),
        accuracy,
        latencies_us: raw,
    }
}

fn ratios(opt: &RunStats, base: &RunStats) -> Ratios {
    Ratios {
        throughput: opt.throughput_rows_per_s / base.throughput_rows_per_s,
        p50_latency: base.p50_us / opt.p50_us,
        p99_latency: base.p99_us / opt.p99_us,
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64() * 1e6)
}

/// Every non-model node in execution order.
pub fn feature_nodes(graph: &TransformationGraph) -> Vec<NodeId> {
    let model = &graph.model_node().id;
    graph
        .sort_minimizing_transitions()
        .order
        .into_iter()
        .filter(|n| n != model)
        .collect()
}

fn fraction_correct(pred: &[f64], labels: &[f64]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / pred.len() as f64
}

/// Classification benchmark in batch or point mode.
///
/// With `cascade` absent the baseline is compared against itself. `labels`
/// holds one label per entry of `rows`.
#[allow(clippy::too_many_arguments)]
pub fn bench_classification(
    mode: BenchMode,
    cascade: Option<&CascadeConfig>,
    original: &TrainedModel,
    graph: &TransformationGraph,
    bundle: &dyn ModelBundle,
    executor: &dyn FeatureExecutor,
    rows: &[usize],
    labels: &[f64],
    options: &BenchOptions,
) -> Result<BenchReport, BenchError> {
    if rows.is_empty() {
        return Err(BenchError::NoRows);
    }
    let nodes = feature_nodes(graph);
    let optimized = |r: &[usize]| match cascade {
        Some(cfg) => predict_cascaded(cfg, bundle, executor, r),
        None => predict_full(original, &nodes, bundle, executor, r),
    };
    let baseline = |r: &[usize]| predict_full(original, &nodes, bundle, executor, r);

    let (opt_lat, base_lat, predictions, scored) = match mode {
        BenchMode::Batch => {
            let reps = options.repetitions.max(1);
            let (mut o, mut b) = (Vec::new(), Vec::new());
            let mut predictions = Vec::new();
            for _ in 0..reps {
                let (p, t) = timed(|| optimized(rows));
                predictions = p?;
                o.push(t);
                let (p, t) = timed(|| baseline(rows));
                p?;
                b.push(t);
            }
            (o, b, predictions, rows.len() * reps)
        }
        BenchMode::Point => {
            let n = options.point_queries.max(MIN_POINT_QUERIES);
            let (mut o, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n));
            let mut predictions = vec![f64::NAN; rows.len()];
            for q in 0..n {
                let i = q % rows.len();
                let row = [rows[i]];
                let (p, t) = timed(|| optimized(&row));
                predictions[i] = p?[0];
                o.push(t);
                let (p, t) = timed(|| baseline(&row));
                p?;
                b.push(t);
            }
            if n < rows.len() {
                predictions.truncate(n);
            }
            (o, b, predictions, n)
        }
        BenchMode::Topk => unreachable!("use bench_topk"),
    };
    let accuracy = fraction_correct(&predictions, &labels[..predictions.len()]);
    let base_acc = {
        let p = baseline(&rows[..predictions.len()])?;
        fraction_correct(&p, &labels[..p.len()])
    };
    let opt = stats(
        if cascade.is_some() { "cascade" } else { "full" },
        scored,
        opt_lat,
        accuracy,
    );
    let base = stats("full", scored, base_lat, base_acc);
    let config = match cascade {
        Some(c) => serde_json::json!({
            "selected_groups": c.selected_groups,
            "threshold": c.threshold,
            "holdout_approx_fraction": c.holdout_approx_fraction,
            "expected_cost_us": c.expected_cost_us,
            "full_cost_us": c.full_cost_us,
        }),
        None => serde_json::json!({ "baseline_only": true }),
    };
    Ok(BenchReport {
        mode,
        ratios: ratios(&opt, &base),
        optimized: opt,
        baseline: base,
        success_fraction: None,
        config,
        predictions,
    })
}

/// Random top-K queries over subsets of `rows`.
pub fn sample_queries(
    rows: &[usize],
    k_dist: &EmpiricalDistribution,
    n_dist: &EmpiricalDistribution,
    count: usize,
    seed: u64,
) -> Vec<(usize, Vec<usize>)> {
    let mut rng = rng_for(seed, 0xB3AC);
    (0..count)
        .map(|_| {
            let k = k_dist.sample(&mut rng);
            let n = n_dist.sample(&mut rng).min(rows.len());
            let mut picked: Vec<usize> = index::sample(&mut rng, rows.len(), n)
                .into_iter()
                .map(|i| rows[i])
                .collect();
            picked.sort_unstable();
            (k, picked)
        })
        .collect()
}

/// Top-K benchmark: the filter against exact scoring of every row.
#[allow(clippy::too_many_arguments)]
pub fn bench_topk(
    filter: Option<&TopKConfig>,
    original: &TrainedModel,
    graph: &TransformationGraph,
    bundle: &dyn ModelBundle,
    executor: &dyn FeatureExecutor,
    rows: &[usize],
    options: &BenchOptions,
) -> Result<BenchReport, BenchError> {
    if rows.is_empty() {
        return Err(BenchError::NoRows);
    }
    let (k_dist, n_dist) = match (filter, &options.k_dist, &options.n_dist) {
        (Some(f), _, _) => (&f.k_dist, &f.n_dist),
        (None, Some(k), Some(n)) => (k, n),
        _ => return Err(BenchError::NoDistributions),
    };
    let nodes = feature_nodes(graph);
    let queries = sample_queries(
        rows,
        k_dist,
        n_dist,
        options.topk_queries.max(1),
        options.seed,
    );

    let (mut o, mut b) = (Vec::new(), Vec::new());
    let mut precisions = Vec::with_capacity(queries.len());
    let mut scored = 0;
    for (k, q) in &queries {
        let (approx, t) = timed(|| match filter {
            Some(f) => query_topk(f, bundle, executor, q, *k),
            None => exact_topk(original, &nodes, bundle, executor, q, *k),
        });
        o.push(t);
        let (exact, t) = timed(|| exact_topk(original, &nodes, bundle, executor, q, *k));
        b.push(t);
        precisions.push(topk_accuracy(&approx?, &exact?, (*k).min(q.len())));
        scored += q.len();
    }
    let mean = precisions.iter().sum::<f64>() / precisions.len() as f64;
    let bound = filter.map_or(1.0, |f| f.accuracy_bound);
    let success =
        precisions.iter().filter(|&&p| p >= bound).count() as f64 / precisions.len() as f64;
    let opt = stats(
        if filter.is_some() { "filter" } else { "exact" },
        scored,
        o,
        mean,
    );
    let base = stats("exact", scored, b, 1.0);
    let config = match filter {
        Some(f) => serde_json::json!({
            "selected_groups": f.selected_groups,
            "r": f.r,
            "degraded": f.degraded,
            "accuracy_bound": f.accuracy_bound,
            "expected_cost_us": f.expected_cost_us,
            "baseline_cost_us": f.baseline_cost_us,
        }),
        None => serde_json::json!({ "baseline_only": true }),
    };
    Ok(BenchReport {
        mode: BenchMode::Topk,
        ratios: ratios(&opt, &base),
        optimized: opt,
        baseline: base,
        success_fraction: Some(success),
        config,
        predictions: precisions,
    })
}

pub fn render_table(report: &BenchReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>8} {:>10} {:>14} {:>12} {:>12} {:>9}",
        "run", "queries", "rows", "rows/s", "p50 us", "p99 us", "accuracy"
    );
    for r in [&report.optimized, &report.baseline] {
        let _ = writeln!(
            s,
            "{:<10} {:>8} {:>10} {:>14.1} {:>12.2} {:>12.2} {:>9.4}",
            r.label, r.queries, r.rows, r.throughput_rows_per_s, r.p50_us, r.p99_us, r.accuracy
        );
    }
    let _ = writeln!(
        s,
        "throughput x{:.2}  p50 x{:.2}  p99 x{:.2}",
        report.ratios.throughput, report.ratios.p50_latency, report.ratios.p99_latency
    );
    if let Some(f) = report.success_fraction {
        let _ = writeln!(s, "queries meeting the precision bound: {:.1}%", f * 100.0);
    }
    s
}

/// One line per timed call: `run,query,latency_us`.
pub fn write_latency_csv<W: Write>(report: &BenchReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "query", "latency_us"])?;
    for r in [&report.optimized, &report.baseline] {
        for (i, l) in r.latencies_us.iter().enumerate() {
            w.write_record([r.label.clone(), i.to_string(), l.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
