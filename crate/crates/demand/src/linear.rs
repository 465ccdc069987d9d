//! Linear regression with a combined L1/L2 penalty, fit by proximal gradient
//! descent on standardized features.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scaling::{check_training, Standardizer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElasticNetParams {
    pub l1_weight: f64,
    pub l2_weight: f64,
    pub learning_rate: f64,
    pub max_iter: usize,
    /// Stop once no coefficient moves by more than this in one iteration.
    pub tolerance: f64,
}

impl Default for ElasticNetParams {
    fn default() -> Self {
        ElasticNetParams {
            l1_weight: 0.0,
            l2_weight: 0.0,
            learning_rate: 0.01,
            max_iter: 1000,
            tolerance: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticNet {
    pub scaler: Standardizer,
    /// Weights on standardized features.
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Minimizes `mean((y - Xw - b)^2) + l1 * |w|_1 + l2 * |w|_2^2`; the
/// intercept is not penalized.
pub fn fit_elastic_net(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    params: &ElasticNetParams,
) -> Result<ElasticNet> {
    check_training(x, y, 2)?;
    let scaler = Standardizer::fit(x);
    let z = scaler.transform(x)?;
    let n = z.nrows() as f64;
    let lr = params.learning_rate;
    let mut w = Array1::<f64>::zeros(z.ncols());
    let mut b = y.sum() / n;
    let mut iterations = 0;
    for _ in 0..params.max_iter {
        iterations += 1;
        let residual = &z.dot(&w) + b - y;
        let grad_w = z.t().dot(&residual) * (2.0 / n);
        let grad_b = 2.0 * residual.sum() / n;
        let mut step = (lr * grad_b).abs();
        b -= lr * grad_b;
        for (wj, gj) in w.iter_mut().zip(&grad_w) {
            let next =
                soft_threshold(*wj - lr * gj, lr * params.l1_weight) / (1.0 + 2.0 * lr * params.l2_weight);
            step = step.max((next - *wj).abs());
            *wj = next;
        }
        if step <= params.tolerance {
            break;
        }
    }
    Ok(ElasticNet {
        scaler,
        weights: w.to_vec(),
        intercept: b,
        iterations,
    })
}

impl ElasticNet {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        let z = self.scaler.transform(x)?;
        Ok(z.dot(&ArrayView1::from(&self.weights)) + self.intercept)
    }

    /// Slopes and intercept in the original feature units.
    pub fn raw_coefficients(&self) -> (Vec<f64>, f64) {
        let slopes: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.scaler.scales)
            .map(|(w, s)| w / s)
            .collect();
        let shift: f64 = slopes.iter().zip(&self.scaler.means).map(|(s, m)| s * m).sum();
        (slopes, self.intercept - shift)
    }
}
