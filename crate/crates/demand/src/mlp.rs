//! One-hidden-layer ReLU regressor trained with Adam and early stopping.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::{Adam, AdamConfig};
use crate::error::{DemandError, Result};
use crate::scaling::{check_training, Standardizer, TargetScaler};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Minimum relative validation-loss decrease that counts as improvement.
    pub tolerance: f64,
    pub validation_fraction: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 100,
            learning_rate: 1e-3,
            batch_size: 200,
            max_epochs: 1000,
            patience: 20,
            tolerance: 1e-4,
            validation_fraction: 0.1,
            l2: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub scaler: Standardizer,
    pub target: TargetScaler,
    /// `inputs x hidden`.
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
    pub l2: f64,
    /// Mean training loss of each completed epoch.
    pub loss_history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpGradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

impl MlpGradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.w1.iter().copied().collect();
        out.extend(self.b1.iter());
        out.extend(self.w2.iter());
        out.push(self.b2);
        out
    }
}

fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> f64 {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    rng.random_range(-bound..bound)
}

impl Mlp {
    /// Untrained network with Glorot-uniform hidden weights, a zero output
    /// layer and identity scaling; it predicts the target mean.
    pub fn init(inputs: usize, hidden: usize, l2: f64, rng: &mut impl Rng) -> Self {
        Mlp {
            scaler: Standardizer {
                means: vec![0.0; inputs],
                scales: vec![1.0; inputs],
            },
            target: TargetScaler {
                mean: 0.0,
                scale: 1.0,
            },
            w1: Array2::from_shape_simple_fn((inputs, hidden), || glorot(rng, inputs, hidden)),
            b1: Array1::from_shape_simple_fn(hidden, || glorot(rng, inputs, hidden)),
            w2: Array1::zeros(hidden),
            b2: 0.0,
            l2,
            loss_history: Vec::new(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn params_flat(&self) -> Vec<f64> {
        MlpGradients {
            w1: self.w1.clone(),
            b1: self.b1.clone(),
            w2: self.w2.clone(),
            b2: self.b2,
        }
        .flatten()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let (a, rest) = flat.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, rest) = rest.split_at(self.w2.len());
        self.w1.iter_mut().zip(a).for_each(|(p, v)| *p = *v);
        self.b1.iter_mut().zip(b).for_each(|(p, v)| *p = *v);
        self.w2.iter_mut().zip(c).for_each(|(p, v)| *p = *v);
        self.b2 = rest[0];
    }

    /// Outputs on already-standardized inputs, in standardized target units.
    fn forward(&self, z: ArrayView2<f64>) -> (Array2<f64>, Array1<f64>) {
        let mut hidden = z.dot(&self.w1) + &self.b1;
        hidden.mapv_inplace(|v| v.max(0.0));
        let out = hidden.dot(&self.w2) + self.b2;
        (hidden, out)
    }

    /// `0.5 * mean((f(z) - t)^2) + 0.5 * l2 * |W|^2 / batch` and its gradient,
    /// on standardized inputs and targets.
    pub fn loss_and_gradients(&self, z: ArrayView2<f64>, t: ArrayView1<f64>) -> (f64, MlpGradients) {
        let b = z.nrows() as f64;
        let (hidden, out) = self.forward(z);
        let err = &out - &t;
        let penalty = self.w1.iter().map(|v| v * v).sum::<f64>() + self.w2.iter().map(|v| v * v).sum::<f64>();
        let loss = 0.5 * err.iter().map(|e| e * e).sum::<f64>() / b + 0.5 * self.l2 * penalty / b;

        let d_out = err / b;
        let g_w2 = hidden.t().dot(&d_out) + &self.w2 * (self.l2 / b);
        let g_b2 = d_out.sum();
        let mut d_hidden = d_out
            .insert_axis(Axis(1))
            .dot(&self.w2.view().insert_axis(Axis(0)));
        d_hidden.zip_mut_with(&hidden, |d, &h| {
            if h <= 0.0 {
                *d = 0.0
            }
        });
        let g_w1 = z.t().dot(&d_hidden) + &self.w1 * (self.l2 / b);
        let g_b1 = d_hidden.sum_axis(Axis(0));
        (
            loss,
            MlpGradients {
                w1: g_w1,
                b1: g_b1,
                w2: g_w2,
                b2: g_b2,
            },
        )
    }

    fn mse_scaled(&self, z: ArrayView2<f64>, t: ArrayView1<f64>) -> f64 {
        let (_, out) = self.forward(z);
        out.iter().zip(t).map(|(o, t)| (o - t).powi(2)).sum::<f64>() / t.len() as f64
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        let z = self.scaler.transform(x)?;
        let (_, out) = self.forward(z.view());
        Ok(out.mapv(|v| self.target.inverse(v)))
    }
}

pub fn fit_mlp(x: ArrayView2<f64>, y: ArrayView1<f64>, params: &MlpParams) -> Result<Mlp> {
    check_training(x, y, 2)?;
    if params.hidden == 0 || params.batch_size == 0 {
        return Err(DemandError::domain(
            "hidden width and batch size must be positive",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let scaler = Standardizer::fit(x);
    let target = TargetScaler::fit(y);
    let z = scaler.transform(x)?;
    let t = target.transform(y);

    let n = x.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = ((n as f64) * params.validation_fraction).floor() as usize;
    let n_val = if n - n_val >= 2 { n_val } else { 0 };
    let (train_idx, val_idx) = order.split_at(n - n_val);
    let (zt, tt) = (z.select(Axis(0), train_idx), t.select(Axis(0), train_idx));
    let (zv, tv) = (z.select(Axis(0), val_idx), t.select(Axis(0), val_idx));

    let mut model = Mlp::init(x.ncols(), params.hidden, params.l2, &mut rng);
    model.scaler = scaler;
    model.target = target;
    let config = AdamConfig {
        learning_rate: params.learning_rate,
        ..AdamConfig::default()
    };
    let mut opt = [
        Adam::new(config, model.w1.len()),
        Adam::new(config, model.b1.len()),
        Adam::new(config, model.w2.len()),
        Adam::new(config, 1),
    ];

    let mut best = (f64::INFINITY, model.clone());
    let mut stale = 0;
    let mut rows: Vec<usize> = (0..train_idx.len()).collect();
    for epoch in 1..=params.max_epochs {
        rows.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in rows.chunks(params.batch_size) {
            let zb = zt.select(Axis(0), batch);
            let tb = tt.select(Axis(0), batch);
            let (loss, g) = model.loss_and_gradients(zb.view(), tb.view());
            if !loss.is_finite() {
                return Err(DemandError::Training {
                    epoch,
                    message: format!("loss became {loss}"),
                });
            }
            total += loss * batch.len() as f64;
            opt[0].update_iter(model.w1.iter_mut(), g.w1.iter().copied());
            opt[1].update_iter(model.b1.iter_mut(), g.b1.iter().copied());
            opt[2].update_iter(model.w2.iter_mut(), g.w2.iter().copied());
            let mut b2 = [model.b2];
            opt[3].update(&mut b2, &[g.b2]);
            model.b2 = b2[0];
        }
        let epoch_loss = total / rows.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(DemandError::Training {
                epoch,
                message: format!("loss became {epoch_loss}"),
            });
        }
        model.loss_history.push(epoch_loss);
        let monitored = if n_val > 0 {
            model.mse_scaled(zv.view(), tv.view())
        } else {
            epoch_loss
        };
        if monitored < best.0 * (1.0 - params.tolerance) {
            best = (monitored, model.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= params.patience {
                break;
            }
        }
    }
    let mut out = best.1;
    out.loss_history = model.loss_history;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_parameter_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = Mlp::init(3, 4, 0.1, &mut rng);
        let flat = m.params_flat();
        assert_eq!(flat.len(), m.n_params());
        let shifted: Vec<f64> = flat.iter().map(|v| v + 1.0).collect();
        m.set_params_flat(&shifted);
        assert_eq!(m.params_flat(), shifted);
    }

    #[test]
    fn zero_target_trains_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_simple_fn((1000, 4), || rng.random_range(-1.0..1.0));
        let y = Array1::zeros(1000);
        let m = fit_mlp(x.view(), y.view(), &MlpParams::default()).unwrap();
        let p = m.predict(x.view()).unwrap();
        assert!(
            p.iter().all(|v| v.abs() < 1e-2),
            "max {}",
            p.iter().fold(0.0f64, |a, v| a.max(v.abs()))
        );
    }

    #[test]
    fn first_epoch_loss_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_simple_fn((50, 3), || rng.random_range(-1.0..1.0));
        let y = x.column(0).mapv(|v| 2.0 * v + 1.0);
        let params = MlpParams {
            max_epochs: 3,
            ..MlpParams::default()
        };
        let a = fit_mlp(x.view(), y.view(), &params).unwrap();
        let b = fit_mlp(x.view(), y.view(), &params).unwrap();
        assert_eq!(a.loss_history[0], b.loss_history[0]);
        assert_eq!(a, b);
    }

    #[test]
    fn learns_a_nonlinear_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Array2::<f64>::from_shape_simple_fn((400, 2), || rng.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(400, |i| x[[i, 0]].abs() + 0.5 * x[[i, 1]]);
        let m = fit_mlp(x.view(), y.view(), &MlpParams::default()).unwrap();
        let p = m.predict(x.view()).unwrap();
        let mse = p.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 400.0;
        assert!(mse < 0.02, "mse {mse}");
    }

    #[test]
    fn divergence_names_the_epoch() {
        let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let y = Array1::from_shape_fn(10, |i| i as f64);
        let params = MlpParams {
            learning_rate: f64::INFINITY,
            ..MlpParams::default()
        };
        match fit_mlp(x.view(), y.view(), &params) {
            Err(DemandError::Training { epoch, .. }) => assert!(epoch <= 2),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
