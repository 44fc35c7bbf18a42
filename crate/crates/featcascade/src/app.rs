//! Run manifests and the command implementations behind the CLI.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use featcascade_core::cascade::CascadeOptions;
use featcascade_core::topk::TopKOptions;
use featcascade_core::{
    analyze_groups, train_cascade, train_topk, AccuracyTarget, CascadeOutcome, Dataset,
    EmpiricalDistribution, FeatureGroup, ModelBundle, NoCascadeReason, NodeCosts, TopKConfig,
    TransformationGraph,
};
use serde::{Deserialize, Serialize};

use crate::bench::{bench_classification, bench_topk, BenchMode, BenchOptions, BenchReport};
use crate::config::{CascadeFile, ModelChoice, TopKFile};
use crate::dataset::load_dataset;
use crate::executor::SimulatedExecutor;
use crate::measure::{cost_sample, measure_node_costs, MeasuredInferenceCost, DEFAULT_REPETITIONS};
use crate::pipeline::load_graph;
use crate::workload::{generate_workload, SyntheticWorkloadSpec};

/// Share of rows held back from training for benchmarking.
pub const VALIDATION_FRACTION: f64 = 0.2;
pub const DEFAULT_K: usize = 20;

pub const CASCADE_FILE: &str = "cascade.json";
pub const TOPK_FILE: &str = "topk.json";
pub const GROUPS_FILE: &str = "groups.csv";
pub const BENCH_FILE: &str = "bench.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

/// Everything a run needs. Every field may come from a manifest file or a
/// command-line flag; flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub pipeline: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub workload: Option<PathBuf>,
    pub seed: Option<u64>,
    pub accuracy_target: Option<f64>,
    pub accuracy_delta: Option<f64>,
    pub accuracy_bound: Option<f64>,
    pub k_dist: Option<Vec<usize>>,
    pub n_dist: Option<Vec<usize>>,
    pub model: Option<ModelChoice>,
    pub out: Option<PathBuf>,
}

impl RunManifest {
    /// Reads a manifest; relative paths are taken relative to its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let mut m: RunManifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut m.pipeline, &mut m.data, &mut m.workload, &mut m.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(m)
    }

    pub fn overridden_by(self, o: RunManifest) -> RunManifest {
        RunManifest {
            pipeline: o.pipeline.or(self.pipeline),
            data: o.data.or(self.data),
            workload: o.workload.or(self.workload),
            seed: o.seed.or(self.seed),
            accuracy_target: o.accuracy_target.or(self.accuracy_target),
            accuracy_delta: o.accuracy_delta.or(self.accuracy_delta),
            accuracy_bound: o.accuracy_bound.or(self.accuracy_bound),
            k_dist: o.k_dist.or(self.k_dist),
            n_dist: o.n_dist.or(self.n_dist),
            model: o.model.or(self.model),
            out: o.out.or(self.out),
        }
    }
}

/// How a command failed, which decides the exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, unreadable or invalid input files.
    Validation(anyhow::Error),
    /// The optimizer ran but found nothing worth deploying.
    NoImprovement(String),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 2,
            Failure::NoImprovement(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Validation(e) | Failure::Runtime(e) => write!(f, "{e:#}"),
            Failure::NoImprovement(s) => f.write_str(s),
        }
    }
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Validation(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

/// Validated, loaded inputs.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub graph: TransformationGraph,
    pub data: Arc<Dataset>,
    pub seed: u64,
    pub target: AccuracyTarget,
    pub accuracy_bound: f64,
    pub k_dist: EmpiricalDistribution,
    pub n_dist: Option<EmpiricalDistribution>,
    pub model: ModelChoice,
    pub out: PathBuf,
}

impl Inputs {
    /// Loads and checks every referenced file before any work starts.
    pub fn load(m: &RunManifest) -> Result<Inputs, Failure> {
        let (graph, data) = match (&m.workload, &m.pipeline, &m.data) {
            (Some(w), None, None) => {
                let text = fs::read_to_string(w)
                    .with_context(|| format!("reading workload {}", w.display()))
                    .map_err(invalid)?;
                let spec: SyntheticWorkloadSpec = serde_json::from_str(&text)
                    .with_context(|| format!("parsing workload {}", w.display()))
                    .map_err(invalid)?;
                let wl = generate_workload(&spec)
                    .with_context(|| format!("workload {}", w.display()))
                    .map_err(invalid)?;
                (wl.graph, wl.data)
            }
            (None, Some(p), Some(d)) => {
                if !d.is_file() {
                    return Err(invalid(anyhow!("dataset {} does not exist", d.display())));
                }
                let text = fs::read_to_string(p)
                    .with_context(|| format!("reading pipeline {}", p.display()))
                    .map_err(invalid)?;
                let graph = load_graph(&text)
                    .with_context(|| format!("pipeline {}", p.display()))
                    .map_err(invalid)?;
                let data = load_dataset(d)
                    .with_context(|| format!("dataset {}", d.display()))
                    .map_err(invalid)?;
                (graph, data)
            }
            (Some(_), _, _) => {
                return Err(invalid(anyhow!(
                    "give either a workload or a pipeline and dataset, not both"
                )))
            }
            _ => return Err(invalid(anyhow!("a pipeline and a dataset are required"))),
        };
        for c in graph.feature_columns() {
            if !data.has_column(c) {
                return Err(invalid(anyhow!(
                    "dataset has no column `{c}` required by the pipeline"
                )));
            }
        }
        let target = match (m.accuracy_target, m.accuracy_delta) {
            (Some(_), Some(_)) => {
                return Err(invalid(anyhow!(
                    "--accuracy-target and --accuracy-delta are mutually exclusive"
                )))
            }
            (Some(a), None) => AccuracyTarget::Absolute(a),
            (None, Some(d)) => AccuracyTarget::BelowOriginal(d),
            (None, None) => AccuracyTarget::default(),
        };
        let dist = |v: &Option<Vec<usize>>, what: &str| {
            v.clone()
                .map(EmpiricalDistribution::new)
                .transpose()
                .with_context(|| format!("{what} distribution"))
                .map_err(invalid)
        };
        let k_dist = dist(&m.k_dist, "K")?
            .unwrap_or_else(|| EmpiricalDistribution::constant(DEFAULT_K).expect("non-zero"));
        let n_dist = dist(&m.n_dist, "N")?;
        let accuracy_bound = m.accuracy_bound.unwrap_or(0.95);
        if !(0.0..=1.0).contains(&accuracy_bound) {
            return Err(invalid(anyhow!("accuracy bound must lie in [0, 1]")));
        }
        Ok(Inputs {
            graph,
            data: Arc::new(data),
            seed: m.seed.unwrap_or(0),
            target,
            accuracy_bound,
            k_dist,
            n_dist,
            model: m.model.unwrap_or_default(),
            out: m.out.clone().unwrap_or_else(|| PathBuf::from(".")),
        })
    }

    pub fn bundle(&self) -> Box<dyn ModelBundle> {
        self.model.bundle()
    }

    /// Rows used for training and rows held back for benchmarking.
    pub fn split(&self) -> Result<(Vec<usize>, Vec<usize>), Failure> {
        self.data
            .split_indices(VALIDATION_FRACTION, self.seed ^ 0xFA11_DA7A)
            .context("validation split")
            .map_err(invalid)
    }

    pub fn executor(&self) -> Result<SimulatedExecutor, Failure> {
        SimulatedExecutor::new(&self.graph, self.data.clone()).map_err(runtime)
    }

    /// Declared costs, with nodes marked for measurement timed on training rows.
    pub fn node_costs(&self, fit_rows: &[usize]) -> Result<NodeCosts, Failure> {
        measure_node_costs(
            &self.graph,
            cost_sample(fit_rows),
            &self.executor()?,
            DEFAULT_REPETITIONS,
        )
        .map_err(runtime)
    }

    fn fit_data(&self, fit_rows: &[usize]) -> Result<Dataset, Failure> {
        self.data.select_rows(fit_rows).map_err(runtime)
    }

    fn write_out(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))
            .map_err(runtime)?;
        let path = self.out.join(name);
        fs::write(&path, bytes)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(runtime)?;
        Ok(path)
    }
}

pub fn group_table(groups: &[FeatureGroup]) -> String {
    let mut s = format!(
        "{:>5} {:>12} {:>12}  columns\n",
        "group", "cost_us", "importance"
    );
    for g in groups {
        s += &format!(
            "{:>5} {:>12.3} {:>12.6}  {}\n",
            g.id,
            g.cost_us,
            g.importance,
            g.columns.join(",")
        );
    }
    s
}

/// CSV with columns `group_id,columns,cost_us,importance`; member columns
/// are joined with `;`.
pub fn write_groups_csv<W: Write>(groups: &[FeatureGroup], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group_id", "columns", "cost_us", "importance"])?;
    for g in groups {
        w.write_record([
            g.id.to_string(),
            g.columns.join(";"),
            g.cost_us.to_string(),
            g.importance.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub struct AnalyzeOutput {
    pub groups: Vec<FeatureGroup>,
    pub csv_path: PathBuf,
}

pub fn analyze(inputs: &Inputs) -> Result<AnalyzeOutput, Failure> {
    let (fit, _) = inputs.split()?;
    let costs = inputs.node_costs(&fit)?;
    let defaults = CascadeOptions::default();
    let groups = analyze_groups(
        &inputs.graph,
        &inputs.fit_data(&fit)?,
        inputs.bundle().as_ref(),
        &costs,
        defaults.holdout_fraction,
        defaults.n_shuffles,
        inputs.seed,
    )
    .map_err(runtime)?;
    let mut buf = Vec::new();
    write_groups_csv(&groups, &mut buf).map_err(runtime)?;
    let csv_path = inputs.write_out(GROUPS_FILE, &buf)?;
    Ok(AnalyzeOutput { groups, csv_path })
}

pub struct CascadeRun {
    pub outcome: CascadeOutcome,
    pub path: Option<PathBuf>,
}

/// Trains a cascade and writes it out. A run that finds no worthwhile
/// cascade still returns its outcome; the caller decides how to report it.
pub fn train_cascade_cmd(inputs: &Inputs) -> Result<CascadeRun, Failure> {
    let bundle = inputs.bundle();
    let (fit, _) = inputs.split()?;
    let costs = inputs.node_costs(&fit)?;
    let options = CascadeOptions {
        target: inputs.target,
        seed: inputs.seed,
        ..CascadeOptions::default()
    };
    let outcome = train_cascade(
        &inputs.graph,
        &inputs.fit_data(&fit)?,
        bundle.as_ref(),
        &costs,
        &options,
        &MeasuredInferenceCost::default(),
    )
    .map_err(|e| match e {
        featcascade_core::CascadeError::Regression => invalid(anyhow!(e)),
        e => runtime(e),
    })?;
    let path = match &outcome.result {
        Ok(cfg) => {
            let file = CascadeFile::new(
                inputs.model,
                inputs.seed,
                &outcome.groups,
                cfg,
                bundle.as_ref(),
            )
            .map_err(runtime)?;
            let text = serde_json::to_string_pretty(&file).map_err(runtime)?;
            Some(inputs.write_out(CASCADE_FILE, text.as_bytes())?)
        }
        Err(_) => None,
    };
    Ok(CascadeRun { outcome, path })
}

pub fn no_cascade_message(reason: NoCascadeReason) -> &'static str {
    match reason {
        NoCascadeReason::NoSavings => {
            "no cascade: the cheapest accurate cascade costs as much as the full pipeline"
        }
        NoCascadeReason::Infeasible => {
            "no cascade: no approximate feature set reaches the accuracy target"
        }
        NoCascadeReason::NoCandidates => "no cascade: every cost budget selected no features",
    }
}

pub struct TopKRun {
    pub config: TopKConfig,
    pub path: PathBuf,
}

pub fn train_topk_cmd(inputs: &Inputs) -> Result<TopKRun, Failure> {
    let n_dist = inputs
        .n_dist
        .clone()
        .ok_or_else(|| invalid(anyhow!("top-k training needs an N distribution (--n-dist)")))?;
    let bundle = inputs.bundle();
    let (fit, _) = inputs.split()?;
    let costs = inputs.node_costs(&fit)?;
    let mut options = TopKOptions::new(inputs.k_dist.clone(), n_dist);
    options.accuracy_bound = inputs.accuracy_bound;
    options.seed = inputs.seed;
    let config = train_topk(
        &inputs.graph,
        &inputs.fit_data(&fit)?,
        bundle.as_ref(),
        &costs,
        &options,
        &MeasuredInferenceCost::default(),
    )
    .map_err(|e| match e {
        featcascade_core::TopKError::HoldoutTooSmall { .. } => invalid(anyhow!(e)),
        e => runtime(e),
    })?;
    let file =
        TopKFile::new(inputs.model, inputs.seed, &config, bundle.as_ref()).map_err(runtime)?;
    let text = serde_json::to_string_pretty(&file).map_err(runtime)?;
    let path = inputs.write_out(TOPK_FILE, text.as_bytes())?;
    Ok(TopKRun { config, path })
}

/// A trained config file of either kind.
pub enum LoadedConfig {
    Cascade(CascadeFile),
    TopK(TopKFile),
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(invalid)?;
    if let Ok(c) = serde_json::from_str::<CascadeFile>(&text) {
        return Ok(LoadedConfig::Cascade(c));
    }
    serde_json::from_str::<TopKFile>(&text)
        .map(LoadedConfig::TopK)
        .with_context(|| format!("{} is neither a cascade nor a top-k config", path.display()))
        .map_err(invalid)
}

pub struct BenchRun {
    pub report: BenchReport,
    pub json_path: PathBuf,
    pub predictions_path: Option<PathBuf>,
}

/// Benchmarks on the held-back validation rows. Without a config the full
/// pipeline is compared against itself.
pub fn bench_cmd(
    inputs: &Inputs,
    mode: BenchMode,
    config: Option<&Path>,
    options: &BenchOptions,
) -> Result<BenchRun, Failure> {
    let (fit, validation) = inputs.split()?;
    let executor = inputs.executor()?;
    let loaded = config.map(load_config).transpose()?;
    let model = match &loaded {
        Some(LoadedConfig::Cascade(c)) => c.model,
        Some(LoadedConfig::TopK(t)) => t.model,
        None => inputs.model,
    };
    let bundle = model.bundle();
    let bundle = bundle.as_ref();

    let report = match (mode, &loaded) {
        (BenchMode::Topk, Some(LoadedConfig::Cascade(_))) => {
            return Err(invalid(anyhow!("top-k mode needs a top-k config")))
        }
        (BenchMode::Batch | BenchMode::Point, Some(LoadedConfig::TopK(_))) => {
            return Err(invalid(anyhow!("{mode:?} mode needs a cascade config")))
        }
        (BenchMode::Topk, Some(LoadedConfig::TopK(t))) => {
            let cfg = t.to_config(bundle).map_err(invalid)?;
            bench_topk(
                Some(&cfg),
                &cfg.original_model,
                &inputs.graph,
                bundle,
                &executor,
                &validation,
                options,
            )
            .map_err(runtime)?
        }
        (BenchMode::Topk, None) => {
            let original = train_baseline(inputs, bundle, &fit)?;
            let mut options = options.clone();
            options.k_dist.get_or_insert_with(|| inputs.k_dist.clone());
            if options.n_dist.is_none() {
                options.n_dist = inputs.n_dist.clone();
            }
            bench_topk(
                None,
                &original,
                &inputs.graph,
                bundle,
                &executor,
                &validation,
                &options,
            )
            .map_err(|e| match e {
                crate::bench::BenchError::NoDistributions => invalid(anyhow!(e)),
                e => runtime(e),
            })?
        }
        (_, Some(LoadedConfig::Cascade(c))) => {
            let cfg = c.to_config(bundle).map_err(invalid)?;
            let labels: Vec<f64> = validation
                .iter()
                .map(|&r| inputs.data.labels()[r])
                .collect();
            bench_classification(
                mode,
                Some(&cfg),
                &cfg.original_model,
                &inputs.graph,
                bundle,
                &executor,
                &validation,
                &labels,
                options,
            )
            .map_err(runtime)?
        }
        (_, None) => {
            let original = train_baseline(inputs, bundle, &fit)?;
            let labels: Vec<f64> = validation
                .iter()
                .map(|&r| inputs.data.labels()[r])
                .collect();
            bench_classification(
                mode,
                None,
                &original,
                &inputs.graph,
                bundle,
                &executor,
                &validation,
                &labels,
                options,
            )
            .map_err(runtime)?
        }
    };

    let json = serde_json::to_string_pretty(&report).map_err(runtime)?;
    let json_path = inputs.write_out(BENCH_FILE, json.as_bytes())?;
    let predictions_path = if mode == BenchMode::Topk {
        None
    } else {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["row", "prediction", "label"])
            .map_err(runtime)?;
        for (&row, p) in validation.iter().zip(&report.predictions) {
            w.write_record([
                row.to_string(),
                p.to_string(),
                inputs.data.labels()[row].to_string(),
            ])
            .map_err(runtime)?;
        }
        let bytes = w.into_inner().map_err(|e| runtime(anyhow!("{e}")))?;
        Some(inputs.write_out(PREDICTIONS_FILE, &bytes)?)
    };
    Ok(BenchRun {
        report,
        json_path,
        predictions_path,
    })
}

/// The full-feature model exactly as cascade training would fit it.
fn train_baseline(
    inputs: &Inputs,
    bundle: &dyn ModelBundle,
    fit: &[usize],
) -> Result<featcascade_core::TrainedModel, Failure> {
    let data = inputs.fit_data(fit)?;
    let (train, _) = data
        .train_holdout_split(CascadeOptions::default().holdout_fraction, inputs.seed)
        .map_err(runtime)?;
    bundle
        .train_on(&train, inputs.graph.feature_columns())
        .map_err(runtime)
}
