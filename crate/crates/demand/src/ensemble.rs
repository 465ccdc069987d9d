use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{DemandError, Result};
use crate::forest::{fit_random_forest, ForestParams, RandomForest};
use crate::gbt::{fit_gbt, GbtParams, GradientBoosting};
use crate::linear::{fit_elastic_net, ElasticNet, ElasticNetParams};
use crate::mlp::{fit_mlp, Mlp, MlpParams};

/// A fitted model that maps feature rows to next-day demand.
pub trait Regressor {
    fn n_features(&self) -> usize;
    fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>>;
}

impl Regressor for ElasticNet {
    fn n_features(&self) -> usize {
        self.scaler.dim()
    }
    fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        ElasticNet::predict(self, x)
    }
}

impl Regressor for RandomForest {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        RandomForest::predict(self, x)
    }
}

impl Regressor for GradientBoosting {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        GradientBoosting::predict(self, x)
    }
}

impl Regressor for Mlp {
    fn n_features(&self) -> usize {
        self.scaler.dim()
    }
    fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Mlp::predict(self, x)
    }
}

/// Median of a non-empty slice; the mean of the two middle order
/// statistics when the length is even. Reorders the slice.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Elementwise median of the members' predictions.
pub fn ensemble_predict(members: &[&dyn Regressor], x: ArrayView2<f64>) -> Result<Array1<f64>> {
    if members.is_empty() {
        return Err(DemandError::domain("ensemble has no members"));
    }
    if let Some(m) = members.iter().find(|m| m.n_features() != x.ncols()) {
        return Err(DemandError::domain(format!(
            "schema mismatch: member expects {} features, input has {}",
            m.n_features(),
            x.ncols()
        )));
    }
    let outputs = members.iter().map(|m| m.predict(x)).collect::<Result<Vec<_>>>()?;
    let mut column = vec![0.0; outputs.len()];
    Ok((0..x.nrows())
        .map(|row| {
            for (slot, out) in column.iter_mut().zip(&outputs) {
                *slot = out[row];
            }
            median(&mut column)
        })
        .collect())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleParams {
    pub linear: ElasticNetParams,
    pub forest: ForestParams,
    pub gbt: GbtParams,
    pub mlp: MlpParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub linear: ElasticNet,
    pub forest: RandomForest,
    pub gbt: GradientBoosting,
    pub mlp: Mlp,
}

impl Ensemble {
    fn members(&self) -> [&dyn Regressor; 4] {
        [&self.linear, &self.forest, &self.gbt, &self.mlp]
    }
}

impl Regressor for Ensemble {
    fn n_features(&self) -> usize {
        self.linear.n_features()
    }
    fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        ensemble_predict(&self.members(), x)
    }
}

pub fn fit_ensemble(x: ArrayView2<f64>, y: ArrayView1<f64>, params: &EnsembleParams) -> Result<Ensemble> {
    Ok(Ensemble {
        linear: fit_elastic_net(x, y, &params.linear)?,
        forest: fit_random_forest(x, y, &params.forest)?,
        gbt: fit_gbt(x, y, &params.gbt)?,
        mlp: fit_mlp(x, y, &params.mlp)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    /// Predicts a fixed value for every row.
    struct Constant(f64, usize);

    impl Regressor for Constant {
        fn n_features(&self) -> usize {
            self.1
        }
        fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
            Ok(Array1::from_elem(x.nrows(), self.0))
        }
    }

    fn combine(values: &[f64]) -> f64 {
        let members: Vec<Constant> = values.iter().map(|&v| Constant(v, 2)).collect();
        let refs: Vec<&dyn Regressor> = members.iter().map(|m| m as &dyn Regressor).collect();
        ensemble_predict(&refs, Array2::zeros((1, 2)).view()).unwrap()[0]
    }

    #[test]
    fn median_examples() {
        assert_eq!(combine(&[1.0, 2.0, 3.0, 4.0]), 2.5);
        assert_eq!(combine(&[7.5; 4]), 7.5);
        // the diverging member only shifts the upper middle statistic
        assert_eq!(combine(&[0.0, 0.0, 10.0, 1000.0]), 5.0);
    }

    #[test]
    fn schema_mismatch_rejected() {
        let a = Constant(1.0, 2);
        let b = Constant(1.0, 3);
        let err = ensemble_predict(&[&a, &b], Array2::zeros((1, 2)).view());
        assert!(matches!(err, Err(DemandError::Domain(_))));
        assert!(ensemble_predict(&[], Array2::zeros((1, 2)).view()).is_err());
    }

    #[test]
    fn fitted_ensemble_predicts_on_training_schema() {
        let x = Array2::from_shape_fn((40, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64);
        let y = x.column(0).mapv(|v| 2.0 * v + 1.0);
        let params = EnsembleParams {
            forest: ForestParams {
                n_trees: 5,
                ..ForestParams::default()
            },
            gbt: GbtParams {
                n_rounds: 10,
                ..GbtParams::default()
            },
            mlp: MlpParams {
                max_epochs: 20,
                hidden: 8,
                ..MlpParams::default()
            },
            ..EnsembleParams::default()
        };
        let e = fit_ensemble(x.view(), y.view(), &params).unwrap();
        let p = e.predict(x.view()).unwrap();
        assert_eq!(p.len(), 40);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!(e.predict(Array2::zeros((2, 4)).view()).is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariant(values in proptest::collection::vec(-1e6f64..1e6, 4), rot in 0usize..4) {
            let mut rotated = values.clone();
            rotated.rotate_left(rot);
            let mut reversed = values.clone();
            reversed.reverse();
            prop_assert_eq!(combine(&values), combine(&rotated));
            prop_assert_eq!(combine(&values), combine(&reversed));
        }
    }
}
