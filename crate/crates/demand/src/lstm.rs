//! Single-layer LSTM with a linear head, trained by backpropagation through
//! time on trailing windows. One mini-batch holds every product's window
//! for the same target day.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::{Adam, AdamConfig};
use crate::error::{DemandError, Result};
use crate::scaling::{Standardizer, TargetScaler};

/// Daily history of one product: feature rows and the quantity sold.
#[derive(Clone, Debug, PartialEq)]
pub struct DailySeries {
    /// `days x features`.
    pub features: Array2<f64>,
    pub quantity: Array1<f64>,
}

impl DailySeries {
    pub fn len(&self) -> usize {
        self.quantity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quantity.is_empty()
    }

    /// Per-day network input: the features followed by that day's quantity.
    fn inputs(&self) -> Array2<f64> {
        concatenate(
            Axis(1),
            &[self.features.view(), self.quantity.view().insert_axis(Axis(1))],
        )
        .expect("rows align")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmParams {
    pub hidden: usize,
    pub window: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Epochs without training-loss improvement before stopping.
    pub patience: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LstmParams {
    fn default() -> Self {
        LstmParams {
            hidden: 50,
            window: 7,
            learning_rate: 1e-3,
            epochs: 1000,
            patience: 20,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub scaler: Standardizer,
    pub target: TargetScaler,
    pub window: usize,
    /// `inputs x 4h`, gate blocks ordered input, forget, cell, output.
    pub wx: Array2<f64>,
    /// `h x 4h`.
    pub wh: Array2<f64>,
    pub b: Array1<f64>,
    pub w_out: Array1<f64>,
    pub b_out: f64,
    pub loss_history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmGradients {
    pub wx: Array2<f64>,
    pub wh: Array2<f64>,
    pub b: Array1<f64>,
    pub w_out: Array1<f64>,
    pub b_out: f64,
}

impl LstmGradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.wx.iter().copied().collect();
        out.extend(self.wh.iter());
        out.extend(self.b.iter());
        out.extend(self.w_out.iter());
        out.push(self.b_out);
        out
    }
}

struct StepCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    c: Array2<f64>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl Lstm {
    pub fn init(inputs: usize, hidden: usize, window: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut u = || rng.random_range(-bound..bound);
        let mut b = Array1::from_shape_simple_fn(4 * hidden, &mut u);
        // forget gates start open
        b.slice_mut(s![hidden..2 * hidden]).mapv_inplace(|v| v + 1.0);
        Lstm {
            scaler: Standardizer {
                means: vec![0.0; inputs],
                scales: vec![1.0; inputs],
            },
            target: TargetScaler {
                mean: 0.0,
                scale: 1.0,
            },
            window,
            wx: Array2::from_shape_simple_fn((inputs, 4 * hidden), &mut u),
            wh: Array2::from_shape_simple_fn((hidden, 4 * hidden), &mut u),
            b,
            w_out: Array1::from_shape_simple_fn(hidden, &mut u),
            b_out: 0.0,
            loss_history: Vec::new(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.wh.nrows()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        LstmGradients {
            wx: self.wx.clone(),
            wh: self.wh.clone(),
            b: self.b.clone(),
            w_out: self.w_out.clone(),
            b_out: self.b_out,
        }
        .flatten()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for p in self
            .wx
            .iter_mut()
            .chain(self.wh.iter_mut())
            .chain(self.b.iter_mut())
            .chain(self.w_out.iter_mut())
        {
            *p = it.next().expect("flat parameter length");
        }
        self.b_out = it.next().expect("flat parameter length");
    }

    fn forward(&self, steps: &[Array2<f64>]) -> (Vec<StepCache>, Array1<f64>) {
        let batch = steps[0].nrows();
        let h = self.hidden();
        let mut h_prev = Array2::<f64>::zeros((batch, h));
        let mut c_prev = Array2::<f64>::zeros((batch, h));
        let mut caches = Vec::with_capacity(steps.len());
        for x in steps {
            let a = x.dot(&self.wx) + h_prev.dot(&self.wh) + &self.b;
            let i = a.slice(s![.., 0..h]).mapv(sigmoid);
            let f = a.slice(s![.., h..2 * h]).mapv(sigmoid);
            let g = a.slice(s![.., 2 * h..3 * h]).mapv(f64::tanh);
            let o = a.slice(s![.., 3 * h..4 * h]).mapv(sigmoid);
            let c = &f * &c_prev + &i * &g;
            let h_new = &o * &c.mapv(f64::tanh);
            caches.push(StepCache {
                x: x.clone(),
                h_prev: std::mem::replace(&mut h_prev, h_new),
                c_prev: std::mem::replace(&mut c_prev, c.clone()),
                i,
                f,
                g,
                o,
                c,
            });
        }
        let out = h_prev.dot(&self.w_out) + self.b_out;
        (caches, out)
    }

    /// `0.5 * mean((y - t)^2)` over a batch and its gradient by
    /// backpropagation through time. `steps[k]` is the `batch x inputs`
    /// input at step `k`; inputs and targets are in standardized units.
    pub fn loss_and_gradients(
        &self,
        steps: &[Array2<f64>],
        targets: ArrayView1<f64>,
    ) -> (f64, LstmGradients) {
        let h = self.hidden();
        let batch = targets.len() as f64;
        let (caches, out) = self.forward(steps);
        let err = &out - &targets;
        let loss = 0.5 * err.iter().map(|e| e * e).sum::<f64>() / batch;

        let d_out = err / batch;
        let last = caches.last().expect("at least one step");
        let h_last = &last.o * &last.c.mapv(f64::tanh);
        let mut grads = LstmGradients {
            wx: Array2::zeros(self.wx.raw_dim()),
            wh: Array2::zeros(self.wh.raw_dim()),
            b: Array1::zeros(self.b.len()),
            w_out: h_last.t().dot(&d_out),
            b_out: d_out.sum(),
        };
        let mut dh = d_out
            .insert_axis(Axis(1))
            .dot(&self.w_out.view().insert_axis(Axis(0)));
        let mut dc = Array2::<f64>::zeros(dh.raw_dim());
        for cache in caches.iter().rev() {
            let tanh_c = cache.c.mapv(f64::tanh);
            dc = dc + &dh * &cache.o * &tanh_c.mapv(|t| 1.0 - t * t);
            let d_o = &dh * &tanh_c;
            let d_i = &dc * &cache.g;
            let d_g = &dc * &cache.i;
            let d_f = &dc * &cache.c_prev;
            let mut da = Array2::<f64>::zeros((dh.nrows(), 4 * h));
            da.slice_mut(s![.., 0..h])
                .assign(&(&d_i * &cache.i.mapv(|v| v * (1.0 - v))));
            da.slice_mut(s![.., h..2 * h])
                .assign(&(&d_f * &cache.f.mapv(|v| v * (1.0 - v))));
            da.slice_mut(s![.., 2 * h..3 * h])
                .assign(&(&d_g * &cache.g.mapv(|v| 1.0 - v * v)));
            da.slice_mut(s![.., 3 * h..4 * h])
                .assign(&(&d_o * &cache.o.mapv(|v| v * (1.0 - v))));
            grads.wx += &cache.x.t().dot(&da);
            grads.wh += &cache.h_prev.t().dot(&da);
            grads.b += &da.sum_axis(Axis(0));
            dh = da.dot(&self.wh.t());
            dc *= &cache.f;
        }
        (loss, grads)
    }

    fn scaled_steps(&self, windows: &[ArrayView2<f64>]) -> Result<Vec<Array2<f64>>> {
        (0..self.window)
            .map(|k| {
                let rows: Vec<ArrayView1<f64>> = windows.iter().map(|w| w.row(k)).collect();
                let stacked = ndarray::stack(Axis(0), &rows).expect("equal widths");
                self.scaler.transform(stacked.view())
            })
            .collect()
    }

    /// Next-day quantity for each series from its last `window` days.
    pub fn predict_next(&self, series: &[DailySeries]) -> Result<Vec<f64>> {
        if series.is_empty() {
            return Ok(Vec::new());
        }
        let inputs: Vec<Array2<f64>> = series.iter().map(DailySeries::inputs).collect();
        for s in &inputs {
            if s.nrows() < self.window {
                return Err(DemandError::domain(format!(
                    "series of {} days is shorter than the window of {}",
                    s.nrows(),
                    self.window
                )));
            }
        }
        let windows: Vec<ArrayView2<f64>> = inputs
            .iter()
            .map(|s| s.slice(s![s.nrows() - self.window.., ..]))
            .collect();
        let steps = self.scaled_steps(&windows)?;
        let (_, out) = self.forward(&steps);
        Ok(out.iter().map(|&v| self.target.inverse(v)).collect())
    }
}

pub fn fit_lstm(series: &[DailySeries], params: &LstmParams) -> Result<Lstm> {
    let Some(first) = series.first() else {
        return Err(DemandError::domain("no series to train on"));
    };
    if params.window == 0 || params.hidden == 0 {
        return Err(DemandError::domain("window and hidden size must be positive"));
    }
    let len = first.len();
    let width = first.features.ncols();
    for s in series {
        if s.len() != len || s.features.nrows() != len || s.features.ncols() != width {
            return Err(DemandError::domain("series must share length and feature width"));
        }
        if s.features.iter().chain(s.quantity.iter()).any(|v| !v.is_finite()) {
            return Err(DemandError::domain("non-finite value in series"));
        }
    }
    if len < params.window + 1 {
        return Err(DemandError::domain(format!(
            "series of {len} days is shorter than the window of {} plus a target",
            params.window
        )));
    }

    let inputs: Vec<Array2<f64>> = series.iter().map(DailySeries::inputs).collect();
    let all_rows =
        concatenate(Axis(0), &inputs.iter().map(|a| a.view()).collect::<Vec<_>>()).expect("equal widths");
    let all_targets: Array1<f64> = series.iter().flat_map(|s| s.quantity.iter().copied()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut model = Lstm::init(width + 1, params.hidden, params.window, &mut rng);
    model.scaler = Standardizer::fit(all_rows.view());
    model.target = TargetScaler::fit(all_targets.view());

    // one batch per target day
    let batches: Vec<(Vec<Array2<f64>>, Array1<f64>)> = (params.window..len)
        .map(|day| {
            let windows: Vec<ArrayView2<f64>> = inputs
                .iter()
                .map(|a| a.slice(s![day - params.window..day, ..]))
                .collect();
            let steps = model.scaled_steps(&windows)?;
            let targets: Array1<f64> = series
                .iter()
                .map(|s| (s.quantity[day] - model.target.mean) / model.target.scale)
                .collect();
            Ok((steps, targets))
        })
        .collect::<Result<_>>()?;

    let config = AdamConfig {
        learning_rate: params.learning_rate,
        ..AdamConfig::default()
    };
    let mut opt = [
        Adam::new(config, model.wx.len()),
        Adam::new(config, model.wh.len()),
        Adam::new(config, model.b.len()),
        Adam::new(config, model.w_out.len()),
        Adam::new(config, 1),
    ];
    let mut order: Vec<usize> = (0..batches.len()).collect();
    let mut best = (f64::INFINITY, model.clone());
    let mut stale = 0;
    for epoch in 1..=params.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &k in &order {
            let (steps, targets) = &batches[k];
            let (loss, g) = model.loss_and_gradients(steps, targets.view());
            if !loss.is_finite() {
                return Err(DemandError::Training {
                    epoch,
                    message: format!("loss became {loss}"),
                });
            }
            total += loss;
            opt[0].update_iter(model.wx.iter_mut(), g.wx.iter().copied());
            opt[1].update_iter(model.wh.iter_mut(), g.wh.iter().copied());
            opt[2].update_iter(model.b.iter_mut(), g.b.iter().copied());
            opt[3].update_iter(model.w_out.iter_mut(), g.w_out.iter().copied());
            let mut b_out = [model.b_out];
            opt[4].update(&mut b_out, &[g.b_out]);
            model.b_out = b_out[0];
        }
        let epoch_loss = total / batches.len() as f64;
        model.loss_history.push(epoch_loss);
        if epoch_loss < best.0 - params.tolerance {
            best = (epoch_loss, model.clone());
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
