//! Cost-aware optimization of feature-computation-bound inference pipelines.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the pure parts:
//! the transformation graph and its scheduling pass, datasets and models,
//! feature-group analysis, knapsack selection, cascade construction and
//! top-K filter construction. Timing, file formats and the CLI live in the
//! `featcascade` companion crate, which plugs in through the
//! [`executor::FeatureExecutor`] and [`cost::InferenceCost`] traits.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cascade;
pub mod cost;
pub mod data;
pub mod executor;
pub mod graph;
pub mod groups;
pub mod knapsack;
pub mod model;
pub mod stats;
pub mod topk;

pub use cascade::{
    analyze_groups, cascade_threshold, expected_cascade_cost, predict_cascaded, predict_full,
    train_cascade, AccuracyTarget, CalibrationRecord, CascadeConfig, CascadeError, CascadeOptions,
    CascadeOutcome, NoCascadeReason, ThresholdChoice,
};
pub use cost::{InferenceCost, NoInferenceCost, NodeCosts};
pub use data::{DataError, Dataset, FeatureMatrix};
pub use executor::{ColumnBatch, ExecutorError, FeatureExecutor};
pub use graph::{
    CostSpec, ExecutionClass, ExecutionOrder, GraphError, NodeId, NodeKind, TransformNode,
    TransformationGraph,
};
pub use groups::{
    identify_feature_groups, permutation_importance, FeatureGroup, GroupCostTable, GroupError,
};
pub use knapsack::select_feature_groups;
pub use model::{
    builtin_linear_regression, builtin_logistic_regression, builtin_stump_ensemble, ModelBundle,
    ModelError, Task, TrainedModel,
};
pub use stats::{wilson_interval, z_for_confidence};
pub use topk::{
    choose_r, expected_topk_cost, query_topk, train_topk, EmpiricalDistribution, GuaranteeLevel,
    RSelection, RankMetric, TopKConfig, TopKError, TopKOptions,
};

/// Deterministic RNG used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Derives an independent RNG stream from a base seed and a stream tag.
pub fn rng_for(seed: u64, stream: u64) -> Rng {
    use rand::SeedableRng;
    // splitmix64 finalizer so nearby (seed, stream) pairs do not collide
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    Rng::seed_from_u64(z)
}
