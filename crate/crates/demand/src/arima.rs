//! ARIMA(p, d, q) fit by conditional sum of squares, with order selection
//! from the sample ACF and PACF.

use serde::{Deserialize, Serialize};

use crate::error::{DemandError, Result};

pub const MAX_DIFFERENCING: usize = 2;
pub const MAX_LAG_ORDER: usize = 5;
pub const MIN_SELECTION_LENGTH: usize = 30;
const BAND_Z: f64 = 1.96;
/// Lags within which the ACF must decay before differencing stops.
const DECAY_HORIZON: usize = 20;
/// 5% asymptotic critical value of the Dickey-Fuller t-statistic with a
/// constant and no trend.
const DICKEY_FULLER_CRITICAL: f64 = -2.86;
const LM_MAX_ITER: usize = 200;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub const DEFAULT: ArimaOrder = ArimaOrder { p: 1, d: 2, q: 1 };

    pub fn new(p: usize, d: usize, q: usize) -> Self {
        ArimaOrder { p, d, q }
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.p, self.d, self.q)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arima {
    pub order: ArimaOrder,
    /// Mean of the differenced series.
    pub mean: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    /// Mean squared conditional residual.
    pub sigma2: f64,
    /// Training series, used as the default forecast origin.
    pub history: Vec<f64>,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn is_constant(x: &[f64]) -> bool {
    x.windows(2)
        .all(|w| (w[1] - w[0]).abs() <= 1e-12 * w[0].abs().max(1.0))
}

pub fn difference(x: &[f64], d: usize) -> Vec<f64> {
    (0..d).fold(x.to_vec(), |acc, _| acc.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Sample autocorrelations at lags `1..=max_lag`.
pub fn acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let m = mean(x);
    let denom: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    (1..=max_lag)
        .map(|k| {
            if k >= x.len() || denom == 0.0 {
                return 0.0;
            }
            x.iter().zip(&x[k..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / denom
        })
        .collect()
}

/// Sample partial autocorrelations at lags `1..=max_lag` by Durbin-Levinson.
pub fn pacf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let r = acf(x, max_lag);
    let mut phi: Vec<f64> = Vec::new();
    let mut out = Vec::with_capacity(max_lag);
    for k in 0..max_lag {
        let num = r[k] - phi.iter().enumerate().map(|(j, p)| p * r[k - 1 - j]).sum::<f64>();
        let den = 1.0 - phi.iter().enumerate().map(|(j, p)| p * r[j]).sum::<f64>();
        let kk = if den.abs() < 1e-12 { 0.0 } else { num / den };
        let prev = phi.clone();
        for (j, p) in phi.iter_mut().enumerate() {
            *p = prev[j] - kk * prev[k - 1 - j];
        }
        phi.push(kk);
        out.push(kk);
    }
    out
}

/// Dickey-Fuller test with a constant: regresses `y_t - y_{t-1}` on
/// `y_{t-1}` and rejects a unit root when the slope's t-statistic is
/// below the 5% critical value.
fn unit_root_rejected(x: &[f64]) -> bool {
    let lagged = &x[..x.len() - 1];
    let change = difference(x, 1);
    let n = lagged.len() as f64;
    let (ml, mc) = (mean(lagged), mean(&change));
    let sxx: f64 = lagged.iter().map(|v| (v - ml).powi(2)).sum();
    if sxx <= 0.0 {
        return false;
    }
    let sxy: f64 = lagged.iter().zip(&change).map(|(l, c)| (l - ml) * (c - mc)).sum();
    let slope = sxy / sxx;
    let rss: f64 = lagged
        .iter()
        .zip(&change)
        .map(|(l, c)| (c - mc - slope * (l - ml)).powi(2))
        .sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    se > 0.0 && slope / se < DICKEY_FULLER_CRITICAL
}

fn leading_run(values: &[f64], band: f64) -> usize {
    values.iter().take_while(|v| v.abs() > band).count()
}

/// Chooses `d` as the smallest differencing order whose ACF drops inside
/// the ±1.96/√n band within `min(20, n/4)` lags, or whose Dickey-Fuller
/// test rejects a unit root. Then `p` and `q` come
/// from the runs of significant PACF and ACF lags at the start of the
/// correlogram: a run that fills every lag up to the cap tails off, a
/// shorter run cuts off. When exactly one of the two cuts off, that side
/// sets the order and the other is zero; when both cut off the shorter
/// run wins; when both tail off the result is (1, 1).
pub fn select_arima_order(series: &[f64]) -> Result<ArimaOrder> {
    if series.len() < MIN_SELECTION_LENGTH {
        return Err(DemandError::domain(format!(
            "order selection needs at least {MIN_SELECTION_LENGTH} points, got {}",
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(DemandError::domain("non-finite value in series"));
    }
    let mut w = series.to_vec();
    let mut d = 0;
    loop {
        if is_constant(&w) {
            return Ok(ArimaOrder::new(0, d, 0));
        }
        let band = BAND_Z / (w.len() as f64).sqrt();
        let horizon = (w.len() / 4).clamp(1, DECAY_HORIZON);
        let decays = acf(&w, horizon).iter().any(|r| r.abs() < band);
        if decays || unit_root_rejected(&w) || d == MAX_DIFFERENCING {
            break;
        }
        w = difference(&w, 1);
        d += 1;
    }
    let band = BAND_Z / (w.len() as f64).sqrt();
    let p_run = leading_run(&pacf(&w, MAX_LAG_ORDER), band);
    let q_run = leading_run(&acf(&w, MAX_LAG_ORDER), band);
    let (p, q) = match (p_run == MAX_LAG_ORDER, q_run == MAX_LAG_ORDER) {
        (false, true) => (p_run, 0),
        (true, false) => (0, q_run),
        (true, true) => (1, 1),
        (false, false) if p_run <= q_run => (p_run, 0),
        (false, false) => (0, q_run),
    };
    Ok(ArimaOrder::new(p, d, q))
}

/// Solves the least-squares problem `min |A b - y|` through the normal
/// equations. `None` when they are singular.
fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let k = rows.first().map_or(0, Vec::len);
    let mut ata = vec![vec![0.0; k]; k];
    let mut aty = vec![0.0; k];
    for (r, t) in rows.iter().zip(y) {
        for i in 0..k {
            aty[i] += r[i] * t;
            for j in 0..k {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    solve_linear(ata, aty)
}

/// Gaussian elimination with partial pivoting.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for col in 0..k {
        let pivot = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for (offset, row) in lower.iter_mut().enumerate() {
            let f = row[col] / pivot_row[col];
            if f != 0.0 {
                for (v, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *v -= f * p;
                }
                b[col + 1 + offset] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let s: f64 = (row + 1..k).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Step-down recursion for `1 + c_1 z + ... + c_m z^m`. All roots lie
/// outside the unit circle iff every reflection coefficient has modulus
/// below one.
pub fn reflection_coefficients(coefficients: &[f64]) -> Vec<f64> {
    let mut a = coefficients.to_vec();
    let mut out = Vec::with_capacity(a.len());
    while let Some(&k) = a.last() {
        out.push(k);
        let m = a.len();
        if k.abs() >= 1.0 {
            break;
        }
        let denom = 1.0 - k * k;
        a = (0..m - 1).map(|j| (a[j] - k * a[m - 2 - j]) / denom).collect();
    }
    out.reverse();
    out
}

fn is_invertible(ma: &[f64]) -> bool {
    let refl = reflection_coefficients(ma);
    refl.len() == ma.len() && refl.iter().all(|k| k.abs() < 1.0)
}

/// Conditional residuals of the centered series `z`; the first `p` are
/// zero and pre-sample shocks are zero.
fn css_residuals(z: &[f64], ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let p = ar.len();
    let mut e = vec![0.0; z.len()];
    for t in p..z.len() {
        let ar_part: f64 = ar.iter().enumerate().map(|(i, a)| a * z[t - 1 - i]).sum();
        let ma_part: f64 = ma
            .iter()
            .enumerate()
            .filter(|(j, _)| t > *j)
            .map(|(j, m)| m * e[t - 1 - j])
            .sum();
        e[t] = z[t] - ar_part - ma_part;
    }
    e
}

fn css_cost(z: &[f64], p: usize, params: &[f64]) -> f64 {
    css_residuals(z, &params[..p], &params[p..])[p..]
        .iter()
        .map(|e| e * e)
        .sum()
}

/// Long-autoregression residuals followed by a regression on lagged
/// values and lagged residuals.
fn hannan_rissanen(z: &[f64], p: usize, q: usize) -> Option<Vec<f64>> {
    let n = z.len();
    let long = (2 * (p + q) + 5).min(n / 4).max(p + q);
    let rows: Vec<Vec<f64>> = (long..n)
        .map(|t| (1..=long).map(|i| z[t - i]).collect())
        .collect();
    let coef = least_squares(&rows, &z[long..])?;
    let mut resid = vec![0.0; n];
    for t in long..n {
        resid[t] = z[t]
            - coef
                .iter()
                .enumerate()
                .map(|(i, c)| c * z[t - 1 - i])
                .sum::<f64>();
    }
    let start = long + q;
    let rows: Vec<Vec<f64>> = (start..n)
        .map(|t| {
            (1..=p)
                .map(|i| z[t - i])
                .chain((1..=q).map(|j| resid[t - j]))
                .collect()
        })
        .collect();
    least_squares(&rows, &z[start..])
}

/// Levenberg-Marquardt on the conditional sum of squares, restricted to
/// the invertible region.
fn refine_css(z: &[f64], p: usize, mut params: Vec<f64>) -> Vec<f64> {
    let k = params.len();
    let mut cost = css_cost(z, p, &params);
    let mut lambda = 1e-3;
    for _ in 0..LM_MAX_ITER {
        let r = css_residuals(z, &params[..p], &params[p..]);
        let r = &r[p..];
        let jac: Vec<Vec<f64>> = (0..k)
            .map(|c| {
                let h = 1e-6 * params[c].abs().max(1.0);
                let mut up = params.clone();
                up[c] += h;
                let mut down = params.clone();
                down[c] -= h;
                let ru = css_residuals(z, &up[..p], &up[p..]);
                let rd = css_residuals(z, &down[..p], &down[p..]);
                ru[p..]
                    .iter()
                    .zip(&rd[p..])
                    .map(|(a, b)| (a - b) / (2.0 * h))
                    .collect()
            })
            .collect();
        let jtj: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| jac[i].iter().zip(&jac[j]).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        let jtr: Vec<f64> = (0..k)
            .map(|i| jac[i].iter().zip(r).map(|(a, b)| a * b).sum())
            .collect();
        let mut improved = false;
        while lambda < 1e10 {
            let mut damped = jtj.clone();
            for (i, row) in damped.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(1e-12);
            }
            let Some(step) = solve_linear(damped, jtr.iter().map(|v| -v).collect()) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(&step).map(|(a, s)| a + s).collect();
            let trial_cost = css_cost(z, p, &trial);
            if is_invertible(&trial[p..]) && trial_cost < cost {
                let rel = (cost - trial_cost) / cost.max(1e-300);
                params = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-12;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    params
}

/// Fits ARIMA(p, d, q) by conditional least squares on the `d`-times
/// differenced, mean-centered series: ordinary least squares when `q` is
/// zero, otherwise a Hannan-Rissanen start refined by Levenberg-Marquardt.
pub fn fit_arima(series: &[f64], order: ArimaOrder) -> Result<Arima> {
    let ArimaOrder { p, d, q } = order;
    let needed = 10 + p + d + q;
    if series.len() < needed {
        return Err(DemandError::domain(format!(
            "ARIMA{order} needs at least {needed} points, got {}",
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(DemandError::domain("non-finite value in series"));
    }
    let w = difference(series, d);
    let mu = mean(&w);
    let z: Vec<f64> = w.iter().map(|v| v - mu).collect();

    let params = if p + q == 0 {
        Vec::new()
    } else if q == 0 {
        let rows: Vec<Vec<f64>> = (p..z.len())
            .map(|t| (1..=p).map(|i| z[t - i]).collect())
            .collect();
        least_squares(&rows, &z[p..]).unwrap_or_else(|| vec![0.0; p])
    } else {
        let start = hannan_rissanen(&z, p, q).unwrap_or_else(|| vec![0.0; p + q]);
        let start = if is_invertible(&start[p..]) {
            start
        } else {
            // pull a non-invertible start into the region before refining
            let mut s = start;
            s[p..].iter_mut().for_each(|v| *v = 0.0);
            s
        };
        refine_css(&z, p, start)
    };
    let (ar, ma) = (params[..p].to_vec(), params[p..].to_vec());
    if !is_invertible(&ma) {
        return Err(DemandError::NonInvertible {
            reflection: reflection_coefficients(&ma),
            coefficients: ma,
        });
    }
    let resid = css_residuals(&z, &ar, &ma);
    let tail = &resid[p..];
    let sigma2 = if tail.is_empty() {
        0.0
    } else {
        tail.iter().map(|e| e * e).sum::<f64>() / tail.len() as f64
    };
    Ok(Arima {
        order,
        mean: mu,
        ar,
        ma,
        sigma2,
        history: series.to_vec(),
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Arima {
    /// One-step-ahead forecast after the training series.
    pub fn forecast(&self) -> f64 {
        self.forecast_from(&self.history)
            .expect("training series satisfies the length requirement")
    }

    /// One-step-ahead forecast after `series` under the fitted parameters.
    pub fn forecast_from(&self, series: &[f64]) -> Result<f64> {
        let ArimaOrder { p, d, .. } = self.order;
        if series.len() <= d + p {
            return Err(DemandError::domain(format!(
                "forecast origin needs more than {} points, got {}",
                d + p,
                series.len()
            )));
        }
        let w = difference(series, d);
        let z: Vec<f64> = w.iter().map(|v| v - self.mean).collect();
        let e = css_residuals(&z, &self.ar, &self.ma);
        let n = z.len();
        let next_z: f64 = self
            .ar
            .iter()
            .enumerate()
            .map(|(i, a)| a * z[n - 1 - i])
            .sum::<f64>()
            + self
                .ma
                .iter()
                .enumerate()
                .filter(|(j, _)| n > *j)
                .map(|(j, m)| m * e[n - 1 - j])
                .sum::<f64>();
        // undo differencing: y_next = w_next - sum_k (-1)^k C(d,k) y_{n+1-k}
        let m = series.len();
        let integrated: f64 = (1..=d)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * binomial(d, k) * series[m - k]
            })
            .sum();
        Ok(next_z + self.mean + integrated)
    }
}
