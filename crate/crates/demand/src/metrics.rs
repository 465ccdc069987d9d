use serde::{Deserialize, Serialize};

use crate::error::{DemandError, Result};

/// Error summary of a prediction vector. `rmse >= mae >= 0` always holds.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
}

pub fn evaluate_predictions(predicted: &[f64], actual: &[f64]) -> Result<EvalReport> {
    if predicted.len() != actual.len() {
        return Err(DemandError::domain(format!(
            "{} predictions for {} actuals",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(DemandError::domain("no predictions to evaluate"));
    }
    let n = predicted.len() as f64;
    let (abs, sq) = predicted
        .iter()
        .zip(actual)
        .fold((0.0, 0.0), |(abs, sq), (p, a)| {
            let e = p - a;
            (abs + e.abs(), sq + e * e)
        });
    let mae = abs / n;
    // guards the last-ulp rounding that could put sqrt(mean sq) under the mean
    let rmse = (sq / n).sqrt().max(mae);
    Ok(EvalReport {
        mae,
        rmse,
        n: predicted.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_examples() {
        let r = evaluate_predictions(&[0.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!((r.mae, r.rmse, r.n), (1.0, 1.0, 2));
        let r = evaluate_predictions(&[0.0, 4.0], &[0.0, 0.0]).unwrap();
        assert_eq!(r.mae, 2.0);
        assert_eq!(r.rmse, 8.0f64.sqrt());
        let r = evaluate_predictions(&[3.5, -1.0], &[3.5, -1.0]).unwrap();
        assert_eq!((r.mae, r.rmse), (0.0, 0.0));
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(evaluate_predictions(&[], &[]).is_err());
        assert!(evaluate_predictions(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)) {
            let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let r = evaluate_predictions(&p, &a).unwrap();
            prop_assert!(r.rmse >= r.mae && r.mae >= 0.0);
        }
    }
}
