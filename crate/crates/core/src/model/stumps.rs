use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    accuracy, check_binary, check_training_input, codec, sigmoid, ModelBundle, ModelError, Task,
    TrainedModel,
};
use crate::data::FeatureMatrix;

/// Gradient-boosted decision stumps on the logistic loss, using second-order
/// (Newton) leaf values.
#[derive(Debug, Clone, PartialEq)]
pub struct StumpEnsemble {
    pub rounds: usize,
    pub learning_rate: f64,
    /// L2 regularization on leaf values.
    pub lambda: f64,
}

pub fn builtin_stump_ensemble(n_rounds: usize) -> StumpEnsemble {
    assert!(n_rounds >= 1, "stump ensemble needs at least one round");
    StumpEnsemble {
        rounds: n_rounds,
        learning_rate: 0.3,
        lambda: 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Stump {
    feature: usize,
    threshold: f64,
    left: f64,
    right: f64,
}

impl Stump {
    fn eval(&self, row: &[f64]) -> f64 {
        if row[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Params {
    base: f64,
    stumps: Vec<Stump>,
}

impl Params {
    fn margin(&self, row: &[f64]) -> f64 {
        self.base + self.stumps.iter().map(|s| s.eval(row)).sum::<f64>()
    }

    fn probabilities(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.rows())
            .map(|r| sigmoid(self.margin(x.row(r))))
            .collect()
    }
}

impl StumpEnsemble {
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

    fn best_stump(&self, x: &FeatureMatrix, sorted: &[Vec<usize>], g: &[f64], h: &[f64]) -> Stump {
        let g_total: f64 = g.iter().sum();
        let h_total: f64 = h.iter().sum();
        let leaf = |gs: f64, hs: f64| -gs / (hs + self.lambda);
        let gain = |gs: f64, hs: f64| gs * gs / (hs + self.lambda);

        let mut best = Stump {
            feature: 0,
            threshold: f64::INFINITY,
            left: leaf(g_total, h_total),
            right: leaf(g_total, h_total),
        };
        let mut best_gain = gain(g_total, h_total);
        for (feature, order) in sorted.iter().enumerate() {
            let (mut gl, mut hl) = (0.0, 0.0);
            for pair in order.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                gl += g[a];
                hl += h[a];
                let (va, vb) = (x.get(a, feature), x.get(b, feature));
                if va == vb {
                    continue;
                }
                let total = gain(gl, hl) + gain(g_total - gl, h_total - hl);
                if total > best_gain + 1e-12 {
                    best_gain = total;
                    best = Stump {
                        feature,
                        threshold: va + (vb - va) / 2.0,
                        left: leaf(gl, hl),
                        right: leaf(g_total - gl, h_total - hl),
                    };
                }
            }
        }
        best
    }
}

impl ModelBundle for StumpEnsemble {
    fn name(&self) -> &'static str {
        "stumps"
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
        let n = x.rows();
        let positive = y.iter().sum::<f64>();
        let prior = ((positive + 0.5) / (n as f64 + 1.0)).clamp(1e-6, 1.0 - 1e-6);
        let base = libm::log(prior / (1.0 - prior));

        let sorted: Vec<Vec<usize>> = (0..x.cols())
            .map(|c| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| x.get(a, c).total_cmp(&x.get(b, c)).then(a.cmp(&b)));
                idx
            })
            .collect();

        let mut margin = vec![base; n];
        let mut stumps = Vec::with_capacity(self.rounds);
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        for _ in 0..self.rounds {
            for i in 0..n {
                let p = sigmoid(margin[i]);
                g[i] = p - y[i];
                h[i] = (p * (1.0 - p)).max(1e-12);
            }
            let mut stump = self.best_stump(x, &sorted, &g, &h);
            stump.left *= self.learning_rate;
            stump.right *= self.learning_rate;
            for (i, m) in margin.iter_mut().enumerate() {
                *m += stump.eval(x.row(i));
            }
            stumps.push(stump);
        }
        Ok(TrainedModel::new(columns.to_vec(), Params { base, stumps }))
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
        codec::put(&mut out, &[p.base]);
        codec::put_u64(&mut out, p.stumps.len() as u64);
        for s in &p.stumps {
            codec::put_u64(&mut out, s.feature as u64);
            codec::put(&mut out, &[s.threshold, s.left, s.right]);
        }
        Ok(out)
    }

    fn decode(&self, columns: Vec<String>, bytes: &[u8]) -> Result<TrainedModel, ModelError> {
        let bad = |reason| ModelError::Decode {
            bundle: "stumps",
            reason,
        };
        let mut r = codec::Reader::new(bytes);
        let base = r.f64s().filter(|v| v.len() == 1).ok_or(bad("bad base"))?[0];
        let count = r.u64().ok_or(bad("truncated stump count"))?;
        let mut stumps = Vec::new();
        for _ in 0..count {
            let feature = r.u64().ok_or(bad("truncated stump"))? as usize;
            let v = r
                .f64s()
                .filter(|v| v.len() == 3)
                .ok_or(bad("truncated stump"))?;
            if feature >= columns.len() {
                return Err(bad("stump feature out of range"));
            }
            stumps.push(Stump {
                feature,
                threshold: v[0],
                left: v[1],
                right: v[2],
            });
        }
        if !r.finished() {
            return Err(bad("trailing bytes"));
        }
        Ok(TrainedModel::new(columns, Params { base, stumps }))
    }
}
