//! JSON files for trained cascades and top-K filters.
//!
//! Everything derived from wall-clock measurement sits under a `timing`
//! key, so two training runs with the same inputs agree on every other
//! field byte for byte.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use featcascade_core::cascade::CascadeConfig;
use featcascade_core::topk::{EmpiricalDistribution, RankMetric, TopKConfig};
use featcascade_core::{
    builtin_linear_regression, builtin_logistic_regression, builtin_stump_ensemble, FeatureGroup,
    ModelBundle, ModelError, NodeId, TopKError, TrainedModel,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad model payload: {0}")]
    Base64(#[from] base64::DecodeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    TopK(#[from] TopKError),
    #[error("config was trained with model `{found}`, not `{expected}`")]
    WrongModel { expected: String, found: String },
}

/// Which built-in model class a pipeline uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelChoice {
    #[default]
    Logistic,
    Stumps {
        rounds: usize,
    },
    Linear,
}

impl ModelChoice {
    pub fn bundle(self) -> Box<dyn ModelBundle> {
        match self {
            ModelChoice::Logistic => Box::new(builtin_logistic_regression()),
            ModelChoice::Stumps { rounds } => Box::new(builtin_stump_ensemble(rounds.max(1))),
            ModelChoice::Linear => Box::new(builtin_linear_regression()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub columns: Vec<String>,
    pub payload: String,
}

impl ModelDoc {
    pub fn encode(bundle: &dyn ModelBundle, model: &TrainedModel) -> Result<Self, ConfigError> {
        Ok(ModelDoc {
            columns: model.feature_columns().to_vec(),
            payload: B64.encode(bundle.encode(model)?),
        })
    }

    pub fn decode(&self, bundle: &dyn ModelBundle) -> Result<TrainedModel, ConfigError> {
        let bytes = B64.decode(&self.payload)?;
        Ok(bundle.decode(self.columns.clone(), &bytes)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDoc {
    pub id: usize,
    pub columns: Vec<String>,
    pub producing_nodes: Vec<String>,
    pub cost_us: f64,
    pub importance: f64,
}

impl From<&FeatureGroup> for GroupDoc {
    fn from(g: &FeatureGroup) -> Self {
        GroupDoc {
            id: g.id,
            columns: g.columns.clone(),
            producing_nodes: g.producing_nodes.iter().map(|n| n.to_string()).collect(),
            cost_us: g.cost_us,
            importance: g.importance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeTiming {
    pub approx_cost_us: f64,
    pub full_cost_us: f64,
    pub expected_cost_us: f64,
    pub predicted_speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeFile {
    pub model: ModelChoice,
    pub seed: u64,
    pub groups: Vec<GroupDoc>,
    pub selected_groups: Vec<usize>,
    pub approx_nodes: Vec<String>,
    pub remaining_nodes: Vec<String>,
    pub threshold: f64,
    pub holdout_approx_fraction: f64,
    pub accuracy_target: f64,
    pub original_holdout_score: f64,
    pub cascade_holdout_score: f64,
    pub approximate_model: ModelDoc,
    pub original_model: ModelDoc,
    pub timing: CascadeTiming,
}

fn ids(nodes: &[NodeId]) -> Vec<String> {
    nodes.iter().map(|n| n.to_string()).collect()
}

fn node_ids(nodes: &[String]) -> Vec<NodeId> {
    nodes.iter().map(|n| NodeId::from(n.as_str())).collect()
}

impl CascadeFile {
    pub fn new(
        model: ModelChoice,
        seed: u64,
        groups: &[FeatureGroup],
        config: &CascadeConfig,
        bundle: &dyn ModelBundle,
    ) -> Result<Self, ConfigError> {
        Ok(CascadeFile {
            model,
            seed,
            groups: groups.iter().map(GroupDoc::from).collect(),
            selected_groups: config.selected_groups.iter().copied().collect(),
            approx_nodes: ids(&config.approx_nodes),
            remaining_nodes: ids(&config.remaining_nodes),
            threshold: config.threshold,
            holdout_approx_fraction: config.holdout_approx_fraction,
            accuracy_target: config.accuracy_target,
            original_holdout_score: config.original_holdout_score,
            cascade_holdout_score: config.cascade_holdout_score,
            approximate_model: ModelDoc::encode(bundle, &config.approximate_model)?,
            original_model: ModelDoc::encode(bundle, &config.original_model)?,
            timing: CascadeTiming {
                approx_cost_us: config.approx_cost_us,
                full_cost_us: config.full_cost_us,
                expected_cost_us: config.expected_cost_us,
                predicted_speedup: config.predicted_speedup(),
            },
        })
    }

    pub fn to_config(&self, bundle: &dyn ModelBundle) -> Result<CascadeConfig, ConfigError> {
        Ok(CascadeConfig {
            selected_groups: self.selected_groups.iter().copied().collect(),
            approx_nodes: node_ids(&self.approx_nodes),
            remaining_nodes: node_ids(&self.remaining_nodes),
            approximate_model: self.approximate_model.decode(bundle)?,
            original_model: self.original_model.decode(bundle)?,
            threshold: self.threshold,
            holdout_approx_fraction: self.holdout_approx_fraction,
            approx_cost_us: self.timing.approx_cost_us,
            full_cost_us: self.timing.full_cost_us,
            expected_cost_us: self.timing.expected_cost_us,
            accuracy_target: self.accuracy_target,
            original_holdout_score: self.original_holdout_score,
            cascade_holdout_score: self.cascade_holdout_score,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopKTiming {
    pub approx_cost_us: f64,
    pub full_cost_us: f64,
    /// Expected per-query cost of the filter.
    pub expected_cost_us: f64,
    /// Expected per-query cost of exact scoring.
    pub baseline_cost_us: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricDoc {
    Precision,
    Recall,
}

impl From<RankMetric> for MetricDoc {
    fn from(m: RankMetric) -> Self {
        match m {
            RankMetric::Precision => MetricDoc::Precision,
            RankMetric::Recall => MetricDoc::Recall,
        }
    }
}

impl From<MetricDoc> for RankMetric {
    fn from(m: MetricDoc) -> Self {
        match m {
            MetricDoc::Precision => RankMetric::Precision,
            MetricDoc::Recall => RankMetric::Recall,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopKFile {
    pub model: ModelChoice,
    pub seed: u64,
    pub groups: Vec<GroupDoc>,
    pub selected_groups: Vec<usize>,
    pub approx_nodes: Vec<String>,
    pub remaining_nodes: Vec<String>,
    pub r: usize,
    pub degraded: bool,
    pub metric: MetricDoc,
    pub accuracy_bound: f64,
    pub k_dist: Vec<usize>,
    pub n_dist: Vec<usize>,
    pub approximate_model: ModelDoc,
    pub original_model: ModelDoc,
    pub timing: TopKTiming,
}

impl TopKFile {
    pub fn new(
        model: ModelChoice,
        seed: u64,
        config: &TopKConfig,
        bundle: &dyn ModelBundle,
    ) -> Result<Self, ConfigError> {
        Ok(TopKFile {
            model,
            seed,
            groups: config.groups.iter().map(GroupDoc::from).collect(),
            selected_groups: config.selected_groups.iter().copied().collect(),
            approx_nodes: ids(&config.approx_nodes),
            remaining_nodes: ids(&config.remaining_nodes),
            r: config.r,
            degraded: config.degraded,
            metric: config.metric.into(),
            accuracy_bound: config.accuracy_bound,
            k_dist: config.k_dist.values().to_vec(),
            n_dist: config.n_dist.values().to_vec(),
            approximate_model: ModelDoc::encode(bundle, &config.approximate_model)?,
            original_model: ModelDoc::encode(bundle, &config.original_model)?,
            timing: TopKTiming {
                approx_cost_us: config.approx_cost_us,
                full_cost_us: config.full_cost_us,
                expected_cost_us: config.expected_cost_us,
                baseline_cost_us: config.baseline_cost_us,
            },
        })
    }

    /// Rebuilds a servable config. Training diagnostics (groups and
    /// candidates) are not restored.
    pub fn to_config(&self, bundle: &dyn ModelBundle) -> Result<TopKConfig, ConfigError> {
        Ok(TopKConfig {
            groups: Vec::new(),
            candidates: Vec::new(),
            selected_groups: self.selected_groups.iter().copied().collect(),
            approx_nodes: node_ids(&self.approx_nodes),
            remaining_nodes: node_ids(&self.remaining_nodes),
            approximate_model: self.approximate_model.decode(bundle)?,
            original_model: self.original_model.decode(bundle)?,
            r: self.r,
            degraded: self.degraded,
            metric: self.metric.into(),
            accuracy_bound: self.accuracy_bound,
            approx_cost_us: self.timing.approx_cost_us,
            full_cost_us: self.timing.full_cost_us,
            expected_cost_us: self.timing.expected_cost_us,
            baseline_cost_us: self.timing.baseline_cost_us,
            k_dist: EmpiricalDistribution::new(self.k_dist.clone())?,
            n_dist: EmpiricalDistribution::new(self.n_dist.clone())?,
        })
    }
}

/// A config file's JSON with the `timing` object removed.
pub fn without_timing(text: &str) -> Result<serde_json::Value, serde_json::Error> {
    let mut v: serde_json::Value = serde_json::from_str(text)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timing");
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_choice_json() {
        let s = serde_json::to_string(&ModelChoice::Stumps { rounds: 20 }).unwrap();
        assert_eq!(s, r#"{"class":"stumps","rounds":20}"#);
        let l: ModelChoice = serde_json::from_str(r#"{"class":"logistic"}"#).unwrap();
        assert_eq!(l, ModelChoice::Logistic);
        assert_eq!(
            ModelChoice::Linear.bundle().name(),
            builtin_linear_regression().name()
        );
    }

    #[test]
    fn timing_is_stripped() {
        let v = without_timing(r#"{"a": 1, "timing": {"x": 2}}"#).unwrap();
        assert_eq!(v, serde_json::json!({"a": 1}));
    }
}
