use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{DemandError, Result};

/// Per-column centering and scaling. Constant columns keep scale 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let n = x.nrows() as f64;
        let means: Vec<f64> = x.axis_iter(Axis(1)).map(|c| c.sum() / n).collect();
        let scales = x
            .axis_iter(Axis(1))
            .zip(&means)
            .map(|(c, m)| {
                let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { means, scales }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_columns(x, self.dim())?;
        let mut out = x.to_owned();
        for (mut col, (m, s)) in out
            .axis_iter_mut(Axis(1))
            .zip(self.means.iter().zip(&self.scales))
        {
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }
}

/// Centering and scaling of a target vector.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub mean: f64,
    pub scale: f64,
}

impl TargetScaler {
    pub fn fit(y: ArrayView1<f64>) -> Self {
        let n = y.len() as f64;
        let mean = y.sum() / n;
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        TargetScaler {
            mean,
            scale: if sd > 1e-12 { sd } else { 1.0 },
        }
    }

    pub fn transform(&self, y: ArrayView1<f64>) -> Array1<f64> {
        y.mapv(|v| (v - self.mean) / self.scale)
    }

    pub fn inverse(&self, v: f64) -> f64 {
        v * self.scale + self.mean
    }
}

pub(crate) fn check_columns(x: ArrayView2<f64>, expected: usize) -> Result<()> {
    if x.ncols() != expected {
        return Err(DemandError::domain(format!(
            "expected {expected} feature columns, got {}",
            x.ncols()
        )));
    }
    Ok(())
}

/// Rejects empty, mismatched or non-finite training data.
pub(crate) fn check_training(x: ArrayView2<f64>, y: ArrayView1<f64>, min_rows: usize) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(DemandError::domain(format!(
            "{} feature rows for {} targets",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() < min_rows {
        return Err(DemandError::domain(format!(
            "need at least {min_rows} rows, got {}",
            x.nrows()
        )));
    }
    if x.ncols() == 0 {
        return Err(DemandError::domain("no feature columns"));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(DemandError::domain("non-finite value in training data"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn standardizes_columns() {
        let x = array![[1.0, 5.0], [3.0, 5.0]];
        let s = Standardizer::fit(x.view());
        assert_eq!(s.means, vec![2.0, 5.0]);
        assert_eq!(s.scales, vec![1.0, 1.0]);
        assert_eq!(s.transform(x.view()).unwrap(), array![[-1.0, 0.0], [1.0, 0.0]]);
        assert!(s.transform(array![[1.0]].view()).is_err());
    }

    #[test]
    fn target_round_trip() {
        let y = array![2.0, 4.0, 9.0];
        let t = TargetScaler::fit(y.view());
        let z = t.transform(y.view());
        for (a, b) in z.iter().zip(&y) {
            assert!((t.inverse(*a) - b).abs() < 1e-12);
        }
    }

    #[test]
    fn training_checks() {
        let x = array![[1.0], [f64::NAN]];
        assert!(check_training(x.view(), array![1.0, 2.0].view(), 2).is_err());
        let x = array![[1.0], [2.0]];
        assert!(check_training(x.view(), array![1.0].view(), 1).is_err());
        assert!(check_training(x.view(), array![1.0, 2.0].view(), 3).is_err());
        assert!(check_training(x.view(), array![1.0, 2.0].view(), 2).is_ok());
    }
}
