use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scaling::{check_columns, check_training};
use crate::tree::{fit_tree_on, MaxFeatures, RegressionTree, TreeParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    /// Each tree sees a bootstrap resample instead of every row.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            tree: TreeParams {
                max_features: MaxFeatures::Sqrt,
                ..TreeParams::default()
            },
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub trees: Vec<RegressionTree>,
}

pub fn fit_random_forest(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    params: &ForestParams,
) -> Result<RandomForest> {
    check_training(x, y, 2)?;
    if params.n_trees == 0 {
        return Err(crate::DemandError::domain("a forest needs at least one tree"));
    }
    let n = x.nrows();
    let trees = (0..params.n_trees)
        .map(|t| {
            // one independent stream per tree
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_on(x, y, rows, &params.tree, &mut rng)
        })
        .collect();
    Ok(RandomForest {
        n_features: x.ncols(),
        trees,
    })
}

impl RandomForest {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        check_columns(x, self.n_features)?;
        let k = self.trees.len() as f64;
        Ok(x.rows()
            .into_iter()
            .map(|r| self.trees.iter().map(|t| t.predict_row(r)).sum::<f64>() / k)
            .collect())
    }
}
