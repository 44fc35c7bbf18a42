use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    accuracy, check_binary, check_training_input, codec, sigmoid, ModelBundle, ModelError,
    Standardizer, Task, TrainedModel,
};
use crate::data::FeatureMatrix;

/// Binary logistic regression fit by full-batch gradient descent with an L2
/// penalty on the weights. Inputs are standardized with training statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for LogisticRegression {
    fn default() -> Self {
        LogisticRegression {
            learning_rate: 0.1,
            iterations: 500,
            l2: 1e-4,
        }
    }
}

pub fn builtin_logistic_regression() -> LogisticRegression {
    LogisticRegression::default()
}

#[derive(Debug, Clone, PartialEq)]
struct Params {
    standardizer: Standardizer,
    weights: Vec<f64>,
    bias: f64,
}

impl Params {
    fn probabilities(&self, x: &FeatureMatrix) -> Vec<f64> {
        let mut buf = vec![0.0; x.cols()];
        (0..x.rows())
            .map(|r| {
                self.standardizer.apply_row(x.row(r), &mut buf);
                let z: f64 = self.bias
                    + buf
                        .iter()
                        .zip(&self.weights)
                        .map(|(a, w)| a * w)
                        .sum::<f64>();
                sigmoid(z)
            })
            .collect()
    }
}

impl LogisticRegression {
    fn params<'m>(
        &self,
        model: &'m TrainedModel,
        x: &FeatureMatrix,
    ) -> Result<&'m Params, ModelError> {
        let p = model
            .payload::<Params>()
            .ok_or(ModelError::ForeignModel(self.name()))?;
        model.check_width(x)?;
        Ok(p)
    }
}

impl ModelBundle for LogisticRegression {
    fn name(&self) -> &'static str {
        "logistic"
    }

    fn task(&self) -> Task {
        Task::Classification
    }

    fn train(
        &self,
        columns: &[String],
        x: &FeatureMatrix,
        y: &[f64],
    ) -> Result<TrainedModel, ModelError> {
        check_training_input(x, y)?;
        check_binary(y)?;
        if columns.len() != x.cols() {
            return Err(ModelError::ShapeMismatch {
                expected: columns.len(),
                actual: x.cols(),
            });
        }
        let standardizer = Standardizer::fit(x);
        let z = standardizer.transform(x);
        let (n, d) = (z.rows(), z.cols());
        let mut weights = vec![0.0; d];
        let mut bias = 0.0;
        let mut grad = vec![0.0; d];
        for _ in 0..self.iterations {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_bias = 0.0;
            for (r, &yr) in y.iter().enumerate().take(n) {
                let row = z.row(r);
                let logit = bias + row.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>();
                let err = sigmoid(logit) - yr;
                grad_bias += err;
                for (g, a) in grad.iter_mut().zip(row) {
                    *g += err * a;
                }
            }
            let inv_n = 1.0 / n as f64;
            for (w, g) in weights.iter_mut().zip(&grad) {
                *w -= self.learning_rate * (g * inv_n + self.l2 * *w);
            }
            bias -= self.learning_rate * grad_bias * inv_n;
        }
        Ok(TrainedModel::new(
            columns.to_vec(),
            Params {
                standardizer,
                weights,
                bias,
            },
        ))
    }

    fn predict(&self, model: &TrainedModel, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        let p = self.params(model, x)?;
        Ok(p.probabilities(x)
            .into_iter()
            .map(|q| if q >= 0.5 { 1.0 } else { 0.0 })
            .collect())
    }

    fn confidence(&self, model: &TrainedModel, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        let p = self.params(model, x)?;
        Ok(p.probabilities(x)
            .into_iter()
            .map(|q| q.max(1.0 - q))
            .collect())
    }

    fn rank_scores(&self, model: &TrainedModel, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        Ok(self.params(model, x)?.probabilities(x))
    }

    fn score(&self, predictions: &[f64], labels: &[f64]) -> f64 {
        accuracy(predictions, labels)
    }

    fn encode(&self, model: &TrainedModel) -> Result<Vec<u8>, ModelError> {
        let p = model
            .payload::<Params>()
            .ok_or(ModelError::ForeignModel(self.name()))?;
        let mut out = Vec::new();
        codec::put(&mut out, &p.standardizer.mean);
        codec::put(&mut out, &p.standardizer.scale);
        codec::put(&mut out, &p.weights);
        codec::put(&mut out, &[p.bias]);
        Ok(out)
    }

    fn decode(&self, columns: Vec<String>, bytes: &[u8]) -> Result<TrainedModel, ModelError> {
        let bad = |reason| ModelError::Decode {
            bundle: "logistic",
            reason,
        };
        let mut r = codec::Reader::new(bytes);
        let mean = r.f64s().ok_or(bad("truncated means"))?;
        let scale = r.f64s().ok_or(bad("truncated scales"))?;
        let weights = r.f64s().ok_or(bad("truncated weights"))?;
        let bias = r.f64s().ok_or(bad("truncated bias"))?;
        if !r.finished() || bias.len() != 1 {
            return Err(bad("trailing bytes"));
        }
        let d = columns.len();
        if mean.len() != d || scale.len() != d || weights.len() != d {
            return Err(bad("column count mismatch"));
        }
        Ok(TrainedModel::new(
            columns,
            Params {
                standardizer: Standardizer { mean, scale },
                weights,
                bias: bias[0],
            },
        ))
    }
}
