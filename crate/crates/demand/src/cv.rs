//! Exhaustive hyperparameter search scored by k-fold mean absolute error.

use ndarray::{ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::artifact::{ModelKind, TrainedModel};
use crate::ensemble::{fit_ensemble, EnsembleParams};
use crate::error::{DemandError, Result};
use crate::forest::{fit_random_forest, ForestParams};
use crate::gbt::{fit_gbt, GbtParams};
use crate::linear::{fit_elastic_net, ElasticNetParams};
use crate::metrics::evaluate_predictions;
use crate::mlp::{fit_mlp, MlpParams};

/// Hyperparameters for one tabular model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum ModelSpec {
    LinearElasticNet(ElasticNetParams),
    RandomForest(ForestParams),
    Gbt(GbtParams),
    Mlp(MlpParams),
    Ensemble(EnsembleParams),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::LinearElasticNet(_) => ModelKind::LinearElasticNet,
            ModelSpec::RandomForest(_) => ModelKind::RandomForest,
            ModelSpec::Gbt(_) => ModelKind::Gbt,
            ModelSpec::Mlp(_) => ModelKind::Mlp,
            ModelSpec::Ensemble(_) => ModelKind::Ensemble,
        }
    }

    pub fn fit(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<TrainedModel> {
        Ok(match self {
            ModelSpec::LinearElasticNet(p) => TrainedModel::LinearElasticNet(fit_elastic_net(x, y, p)?),
            ModelSpec::RandomForest(p) => TrainedModel::RandomForest(fit_random_forest(x, y, p)?),
            ModelSpec::Gbt(p) => TrainedModel::Gbt(fit_gbt(x, y, p)?),
            ModelSpec::Mlp(p) => TrainedModel::Mlp(fit_mlp(x, y, p)?),
            ModelSpec::Ensemble(p) => TrainedModel::Ensemble(fit_ensemble(x, y, p)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvOutcome {
    pub best_index: usize,
    pub best: ModelSpec,
    /// Mean validation MAE of each grid point, in grid order.
    pub scores: Vec<f64>,
}

/// Fold index of each row: a seeded shuffle dealt round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        fold[row] = pos % folds;
    }
    fold
}

pub fn grid_search_cv(
    grid: &[ModelSpec],
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    folds: usize,
    seed: u64,
) -> Result<CvOutcome> {
    if grid.is_empty() {
        return Err(DemandError::domain("empty hyperparameter grid"));
    }
    if folds < 2 || x.nrows() < folds {
        return Err(DemandError::domain(format!(
            "{folds} folds over {} rows",
            x.nrows()
        )));
    }
    if x.nrows() != y.len() {
        return Err(DemandError::domain("feature rows and targets differ in length"));
    }
    let assignment = fold_assignment(x.nrows(), folds, seed);
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| (0..x.nrows()).partition(|&r| assignment[r] != f))
        .collect();

    let mut scores = Vec::with_capacity(grid.len());
    for spec in grid {
        let mut total = 0.0;
        for (train, valid) in &splits {
            let model = spec.fit(x.select(Axis(0), train).view(), y.select(Axis(0), train).view())?;
            let predicted = model.predict(x.select(Axis(0), valid).view())?;
            let actual = y.select(Axis(0), valid);
            total += evaluate_predictions(
                predicted.as_slice().expect("contiguous"),
                actual.as_slice().expect("contiguous"),
            )?
            .mae;
        }
        scores.push(total / folds as f64);
    }
    // strict comparison keeps the earliest of tied scores
    let best_index = scores
        .iter()
        .enumerate()
        .fold(0, |best, (i, s)| if *s < scores[best] { i } else { best });
    Ok(CvOutcome {
        best_index,
        best: grid[best_index].clone(),
        scores,
    })
}
