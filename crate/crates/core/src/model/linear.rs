use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    check_training_input, codec, ModelBundle, ModelError, Standardizer, Task, TrainedModel,
};
use crate::data::FeatureMatrix;

/// Ridge regression solved in closed form on standardized inputs.
/// Scores with the coefficient of determination (R²).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegression {
    pub l2: f64,
}

pub fn builtin_linear_regression() -> LinearRegression {
    LinearRegression { l2: 1e-4 }
}

#[derive(Debug, Clone, PartialEq)]
struct Params {
    standardizer: Standardizer,
    weights: Vec<f64>,
    intercept: f64,
}

impl Params {
    fn outputs(&self, x: &FeatureMatrix) -> Vec<f64> {
        let mut buf = vec![0.0; x.cols()];
        (0..x.rows())
            .map(|r| {
                self.standardizer.apply_row(x.row(r), &mut buf);
                self.intercept
                    + buf
                        .iter()
                        .zip(&self.weights)
                        .map(|(a, w)| a * w)
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Solves `a x = b` for a small dense symmetric system by Gaussian elimination
/// with partial pivoting. `a` is row-major `d x d`.
fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let d = b.len();
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&i, &j| libm::fabs(a[i * d + col]).total_cmp(&libm::fabs(a[j * d + col])))
            .unwrap_or(col);
        if pivot != col {
            for k in 0..d {
                a.swap(col * d + k, pivot * d + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * d + col];
        if libm::fabs(diag) < 1e-300 {
            continue;
        }
        for row in col + 1..d {
            let f = a[row * d + col] / diag;
            if f == 0.0 {
                continue;
            }
            for k in col..d {
                a[row * d + k] -= f * a[col * d + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; d];
    for row in (0..d).rev() {
        let diag = a[row * d + row];
        if libm::fabs(diag) < 1e-300 {
            continue;
        }
        let s: f64 = (row + 1..d).map(|k| a[row * d + k] * x[k]).sum();
        x[row] = (b[row] - s) / diag;
    }
    x
}

impl LinearRegression {
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

impl ModelBundle for LinearRegression {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn task(&self) -> Task {
        Task::Regression
    }

    fn train(
        &self,
        columns: &[String],
        x: &FeatureMatrix,
        y: &[f64],
    ) -> Result<TrainedModel, ModelError> {
        check_training_input(x, y)?;
        if columns.len() != x.cols() {
            return Err(ModelError::ShapeMismatch {
                expected: columns.len(),
                actual: x.cols(),
            });
        }
        let standardizer = Standardizer::fit(x);
        let z = standardizer.transform(x);
        let (n, d) = (z.rows(), z.cols());
        let intercept = y.iter().sum::<f64>() / n as f64;
        let mut gram = vec![0.0; d * d];
        let mut rhs = vec![0.0; d];
        for (r, &yr) in y.iter().enumerate().take(n) {
            let row = z.row(r);
            let centered = yr - intercept;
            for i in 0..d {
                rhs[i] += row[i] * centered;
                for j in 0..d {
                    gram[i * d + j] += row[i] * row[j];
                }
            }
        }
        let inv_n = 1.0 / n as f64;
        gram.iter_mut().for_each(|v| *v *= inv_n);
        rhs.iter_mut().for_each(|v| *v *= inv_n);
        for i in 0..d {
            gram[i * d + i] += self.l2;
        }
        let weights = solve(gram, rhs);
        Ok(TrainedModel::new(
            columns.to_vec(),
            Params {
                standardizer,
                weights,
                intercept,
            },
        ))
    }

    fn predict(&self, model: &TrainedModel, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        Ok(self.params(model, x)?.outputs(x))
    }

    fn rank_scores(&self, model: &TrainedModel, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        self.predict(model, x)
    }

    fn score(&self, predictions: &[f64], labels: &[f64]) -> f64 {
        if labels.is_empty() {
            return 0.0;
        }
        let mean = labels.iter().sum::<f64>() / labels.len() as f64;
        let sse: f64 = predictions
            .iter()
            .zip(labels)
            .map(|(p, y)| (p - y) * (p - y))
            .sum();
        let sst: f64 = labels.iter().map(|y| (y - mean) * (y - mean)).sum();
        if sst == 0.0 {
            return if sse == 0.0 { 1.0 } else { 0.0 };
        }
        1.0 - sse / sst
    }

    fn encode(&self, model: &TrainedModel) -> Result<Vec<u8>, ModelError> {
        let p = model
            .payload::<Params>()
            .ok_or(ModelError::ForeignModel(self.name()))?;
        let mut out = Vec::new();
        codec::put(&mut out, &p.standardizer.mean);
        codec::put(&mut out, &p.standardizer.scale);
        codec::put(&mut out, &p.weights);
        codec::put(&mut out, &[p.intercept]);
        Ok(out)
    }

    fn decode(&self, columns: Vec<String>, bytes: &[u8]) -> Result<TrainedModel, ModelError> {
        let bad = |reason| ModelError::Decode {
            bundle: "linear",
            reason,
        };
        let mut r = codec::Reader::new(bytes);
        let mean = r.f64s().ok_or(bad("truncated means"))?;
        let scale = r.f64s().ok_or(bad("truncated scales"))?;
        let weights = r.f64s().ok_or(bad("truncated weights"))?;
        let intercept = r
            .f64s()
            .filter(|v| v.len() == 1)
            .ok_or(bad("bad intercept"))?[0];
        let d = columns.len();
        if !r.finished() || mean.len() != d || scale.len() != d || weights.len() != d {
            return Err(bad("column count mismatch"));
        }
        Ok(TrainedModel::new(
            columns,
            Params {
                standardizer: Standardizer { mean, scale },
                weights,
                intercept,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::super::testdata::names;
    use super::*;

    #[test]
    fn recovers_linear_function() {
        let n = 50;
        let mut data = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let a = i as f64 * 0.1;
            let b = libm::sin(i as f64);
            data.push(a);
            data.push(b);
            y.push(3.0 * a - 2.0 * b + 1.0);
        }
        let x = FeatureMatrix::from_row_major(n, 2, data);
        let bundle = builtin_linear_regression();
        let m = bundle.train(&names(2), &x, &y).unwrap();
        let r2 = bundle.score(&bundle.predict(&m, &x).unwrap(), &y);
        assert!(r2 > 0.9999, "r2 {r2}");
        assert_eq!(bundle.task(), Task::Regression);
        assert!(matches!(
            bundle.confidence(&m, &x),
            Err(ModelError::NoConfidence)
        ));
    }
}
