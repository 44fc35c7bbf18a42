use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use featcascade::app::{
    analyze, bench_cmd, group_table, no_cascade_message, train_cascade_cmd, train_topk_cmd,
    Failure, Inputs, RunManifest,
};
use featcascade::bench::{render_table, write_latency_csv, BenchMode, BenchOptions};
use featcascade::config::ModelChoice;
use featcascade::dataset::write_dataset;
use featcascade::pipeline::graph_to_json;
use featcascade::workload::{generate_workload, SyntheticWorkloadSpec};

#[derive(Parser)]
#[command(
    name = "featcascade",
    version,
    about = "Cost-aware cascades and top-K filters for feature pipelines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print feature groups with their cost and importance.
    Analyze(RunArgs),
    /// Train a cascade and write cascade.json.
    TrainCascade(RunArgs),
    /// Train a top-K filter and write topk.json.
    TrainTopk(RunArgs),
    /// Benchmark a trained config, or the full pipeline alone, on held-back rows.
    Bench(BenchArgs),
    /// Write a synthetic workload as pipeline.json and data.csv.
    Generate {
        #[arg(long)]
        workload: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Logistic,
    Stumps,
    Linear,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON manifest; flags override its fields.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    pipeline: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Synthetic workload spec, instead of a pipeline and dataset.
    #[arg(long)]
    workload: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Absolute accuracy the cascade must keep.
    #[arg(long)]
    accuracy_target: Option<f64>,
    /// Allowed accuracy loss below the original model (default 0.001).
    #[arg(long)]
    accuracy_delta: Option<f64>,
    /// Minimum top-K precision (default 0.95).
    #[arg(long)]
    accuracy_bound: Option<f64>,
    /// JSON array of observed K values.
    #[arg(long)]
    k_dist: Option<String>,
    /// JSON array of observed N values.
    #[arg(long)]
    n_dist: Option<String>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Boosting rounds for the stump model.
    #[arg(long, default_value_t = 50)]
    rounds: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value = "batch")]
    mode: BenchMode,
    /// cascade.json or topk.json; omit to time the full pipeline against itself.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    #[arg(long, default_value_t = 1000)]
    point_queries: usize,
    #[arg(long, default_value_t = 20)]
    topk_queries: usize,
    /// Also write per-call latencies as CSV.
    #[arg(long)]
    latency_csv: Option<PathBuf>,
}

fn parse_dist(s: &Option<String>, flag: &str) -> Result<Option<Vec<usize>>, Failure> {
    s.as_deref()
        .map(|s| {
            serde_json::from_str(s)
                .with_context(|| format!("{flag} must be a JSON array of integers"))
        })
        .transpose()
        .map_err(Failure::Validation)
}

fn inputs(a: &RunArgs) -> Result<Inputs, Failure> {
    let base = match &a.manifest {
        Some(p) => RunManifest::load(p).map_err(Failure::Validation)?,
        None => RunManifest::default(),
    };
    let flags = RunManifest {
        pipeline: a.pipeline.clone(),
        data: a.data.clone(),
        workload: a.workload.clone(),
        seed: a.seed,
        accuracy_target: a.accuracy_target,
        accuracy_delta: a.accuracy_delta,
        accuracy_bound: a.accuracy_bound,
        k_dist: parse_dist(&a.k_dist, "--k-dist")?,
        n_dist: parse_dist(&a.n_dist, "--n-dist")?,
        model: a.model.map(|m| match m {
            ModelArg::Logistic => ModelChoice::Logistic,
            ModelArg::Stumps => ModelChoice::Stumps { rounds: a.rounds },
            ModelArg::Linear => ModelChoice::Linear,
        }),
        out: a.out.clone(),
    };
    Inputs::load(&base.overridden_by(flags))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze(a) => {
            let inputs = inputs(&a)?;
            let out = analyze(&inputs)?;
            print!("{}", group_table(&out.groups));
            println!("wrote {}", out.csv_path.display());
        }
        Command::TrainCascade(a) => {
            let inputs = inputs(&a)?;
            let run = train_cascade_cmd(&inputs)?;
            let o = &run.outcome;
            println!(
                "original holdout score {:.4}, target {:.4}, cost(F) {:.3} us/row",
                o.original_holdout_score, o.accuracy_target, o.full_cost_us
            );
            match &o.result {
                Ok(c) => {
                    let groups: Vec<String> =
                        c.selected_groups.iter().map(usize::to_string).collect();
                    println!("selected groups  {}", groups.join(","));
                    println!("threshold        {}", c.threshold);
                    println!("approx fraction  {:.4}", c.holdout_approx_fraction);
                    println!("expected cost    {:.3} us/row", c.expected_cost_us);
                    println!("predicted speedup {:.2}x", c.predicted_speedup());
                    if let Some(p) = &run.path {
                        println!("wrote {}", p.display());
                    }
                }
                Err(reason) => {
                    return Err(Failure::NoImprovement(no_cascade_message(*reason).into()))
                }
            }
        }
        Command::TrainTopk(a) => {
            let inputs = inputs(&a)?;
            let run = train_topk_cmd(&inputs)?;
            let c = &run.config;
            let groups: Vec<String> = c.selected_groups.iter().map(usize::to_string).collect();
            println!("selected groups  {}", groups.join(","));
            println!("r                {}", c.r);
            println!("expected cost    {:.3} us/query", c.expected_cost_us);
            println!("exact cost       {:.3} us/query", c.baseline_cost_us);
            println!("wrote {}", run.path.display());
            if c.degraded {
                return Err(Failure::NoImprovement(
                    "degraded guarantee: no filter ratio below the cap met the precision bound"
                        .into(),
                ));
            }
        }
        Command::Bench(b) => {
            let inputs = inputs(&b.run)?;
            let options = BenchOptions {
                repetitions: b.repetitions,
                point_queries: b.point_queries,
                topk_queries: b.topk_queries,
                seed: inputs.seed,
                ..BenchOptions::default()
            };
            let run = bench_cmd(&inputs, b.mode, b.config.as_deref(), &options)?;
            print!("{}", render_table(&run.report));
            println!("wrote {}", run.json_path.display());
            if let Some(p) = &b.latency_csv {
                let f = fs::File::create(p)
                    .with_context(|| format!("creating {}", p.display()))
                    .map_err(Failure::Runtime)?;
                write_latency_csv(&run.report, f).map_err(|e| Failure::Runtime(e.into()))?;
            }
        }
        Command::Generate { workload, out } => {
            let text = fs::read_to_string(&workload)
                .with_context(|| format!("reading {}", workload.display()))
                .map_err(Failure::Validation)?;
            let spec: SyntheticWorkloadSpec = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", workload.display()))
                .map_err(Failure::Validation)?;
            let w = generate_workload(&spec).map_err(|e| Failure::Validation(anyhow!(e)))?;
            let io = |e: std::io::Error| Failure::Runtime(e.into());
            fs::create_dir_all(&out).map_err(io)?;
            fs::write(out.join("pipeline.json"), graph_to_json(&w.graph)).map_err(io)?;
            let f = fs::File::create(out.join("data.csv")).map_err(io)?;
            write_dataset(&w.data, f).map_err(|e| Failure::Runtime(e.into()))?;
            println!(
                "wrote {} and {}",
                out.join("pipeline.json").display(),
                out.join("data.csv").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("featcascade: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
