//! Gradient-boosted regression trees under squared loss.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scaling::{check_columns, check_training};
use crate::tree::{fit_tree_on, MaxFeatures, RegressionTree, TreeParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub n_features: usize,
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    /// Training MSE before the first round and after each round.
    pub train_loss: Vec<f64>,
}

fn mse(a: &Array1<f64>, y: ArrayView1<f64>) -> f64 {
    a.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64
}

pub fn fit_gbt(x: ArrayView2<f64>, y: ArrayView1<f64>, params: &GbtParams) -> Result<GradientBoosting> {
    check_training(x, y, 2)?;
    let n = x.nrows();
    let base = y.sum() / n as f64;
    let tree_params = TreeParams {
        max_depth: Some(params.max_depth),
        min_samples_leaf: params.min_samples_leaf,
        max_features: MaxFeatures::All,
        ..TreeParams::default()
    };
    // all features are scanned in order, so the generator is never drawn from
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut fitted = Array1::from_elem(n, base);
    let mut train_loss = vec![mse(&fitted, y)];
    let mut trees = Vec::with_capacity(params.n_rounds);
    for _ in 0..params.n_rounds {
        let residual = &y - &fitted;
        let tree = fit_tree_on(x, residual.view(), (0..n).collect(), &tree_params, &mut rng);
        for (f, row) in fitted.iter_mut().zip(x.rows()) {
            *f += params.learning_rate * tree.predict_row(row);
        }
        train_loss.push(mse(&fitted, y));
        trees.push(tree);
    }
    Ok(GradientBoosting {
        n_features: x.ncols(),
        base,
        learning_rate: params.learning_rate,
        trees,
        train_loss,
    })
}

impl GradientBoosting {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_columns(x, self.n_features)?;
        Ok(x.rows()
            .into_iter()
            .map(|r| {
                self.base
                    + self
                        .trees
                        .iter()
                        .map(|t| self.learning_rate * t.predict_row(r))
                        .sum::<f64>()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn data(seed: u64, n: usize, p: usize) -> (Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-3.0..3.0));
        let y = Array1::from_shape_fn(n, |i| {
            if x[[i, 1]] > 0.4 {
                5.0 + x[[i, 0]]
            } else {
                -x[[i, 2]]
            }
        });
        (x, y)
    }

    /// Minimum total child SSE over every feature and every cut between
    /// consecutive distinct values.
    fn exhaustive_best_sse(x: &Array2<f64>, y: &Array1<f64>) -> f64 {
        let sse = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|a| (a - m).powi(2)).sum::<f64>()
        };
        let mut best = f64::INFINITY;
        for f in 0..x.ncols() {
            for i in 0..x.nrows() {
                let t = x[[i, f]];
                let (l, r): (Vec<f64>, Vec<f64>) = (0..x.nrows()).map(|k| (x[[k, f]] <= t, y[k])).fold(
                    (vec![], vec![]),
                    |mut acc, (left, v)| {
                        if left {
                            acc.0.push(v)
                        } else {
                            acc.1.push(v)
                        }
                        acc
                    },
                );
                if !l.is_empty() && !r.is_empty() {
                    best = best.min(sse(&l) + sse(&r));
                }
            }
        }
        best
    }

    #[test]
    fn stump_matches_exhaustive_split() {
        for seed in 0..5 {
            let (x, y) = data(seed, 40, 3);
            let params = GbtParams {
                n_rounds: 1,
                learning_rate: 1.0,
                max_depth: 1,
                min_samples_leaf: 1,
            };
            let m = fit_gbt(x.view(), y.view(), &params).unwrap();
            let n = y.len() as f64;
            let got = m.train_loss[1] * n;
            let want = exhaustive_best_sse(&x, &y);
            assert!((got - want).abs() < 1e-9 * want.max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn zero_learning_rate_predicts_mean() {
        let (x, y) = data(1, 30, 3);
        let params = GbtParams {
            learning_rate: 0.0,
            n_rounds: 5,
            ..GbtParams::default()
        };
        let m = fit_gbt(x.view(), y.view(), &params).unwrap();
        let mean = y.sum() / y.len() as f64;
        assert!(m.predict(x.view()).unwrap().iter().all(|&p| p == mean));
    }

    #[test]
    fn training_loss_never_increases() {
        let (x, y) = data(2, 80, 3);
        let m = fit_gbt(x.view(), y.view(), &GbtParams::default()).unwrap();
        assert_eq!(m.train_loss.len(), 101);
        for w in m.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{w:?}");
        }
        assert!(m.train_loss[100] < 0.05 * m.train_loss[0]);
    }
}
