use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::arima::Arima;
use crate::ensemble::{Ensemble, Regressor};
use crate::error::{DemandError, Result};
use crate::forest::RandomForest;
use crate::gbt::GradientBoosting;
use crate::linear::ElasticNet;
use crate::lstm::Lstm;
use crate::mlp::Mlp;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LinearElasticNet,
    RandomForest,
    Gbt,
    Mlp,
    Ensemble,
    Lstm,
    Arima,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::LinearElasticNet,
        ModelKind::RandomForest,
        ModelKind::Gbt,
        ModelKind::Mlp,
        ModelKind::Ensemble,
        ModelKind::Lstm,
        ModelKind::Arima,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::LinearElasticNet => "linear_elastic_net",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Gbt => "gbt",
            ModelKind::Mlp => "mlp",
            ModelKind::Ensemble => "ensemble",
            ModelKind::Lstm => "lstm",
            ModelKind::Arima => "arima",
        }
    }

    /// Kinds that predict from a feature matrix rather than a series.
    pub fn is_tabular(self) -> bool {
        !matches!(self, ModelKind::Lstm | ModelKind::Arima)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = DemandError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| DemandError::domain(format!("unknown model kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum TrainedModel {
    LinearElasticNet(ElasticNet),
    RandomForest(RandomForest),
    Gbt(GradientBoosting),
    Mlp(Mlp),
    Ensemble(Ensemble),
    Lstm(Lstm),
    Arima(Arima),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::LinearElasticNet(_) => ModelKind::LinearElasticNet,
            TrainedModel::RandomForest(_) => ModelKind::RandomForest,
            TrainedModel::Gbt(_) => ModelKind::Gbt,
            TrainedModel::Mlp(_) => ModelKind::Mlp,
            TrainedModel::Ensemble(_) => ModelKind::Ensemble,
            TrainedModel::Lstm(_) => ModelKind::Lstm,
            TrainedModel::Arima(_) => ModelKind::Arima,
        }
    }

    pub fn as_regressor(&self) -> Option<&dyn Regressor> {
        match self {
            TrainedModel::LinearElasticNet(m) => Some(m),
            TrainedModel::RandomForest(m) => Some(m),
            TrainedModel::Gbt(m) => Some(m),
            TrainedModel::Mlp(m) => Some(m),
            TrainedModel::Ensemble(m) => Some(m),
            TrainedModel::Lstm(_) | TrainedModel::Arima(_) => None,
        }
    }

    /// Predictions for a feature matrix; sequence models are rejected.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.as_regressor()
            .ok_or_else(|| {
                DemandError::domain(format!("{} forecasts from series, not feature rows", self.kind()))
            })?
            .predict(x)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub hyperparameters: serde_json::Value,
    pub seed: u64,
    pub train_start: Option<NaiveDate>,
    pub train_end: Option<NaiveDate>,
    pub feature_columns: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub model: TrainedModel,
    pub training_meta: TrainingMeta,
}

impl ModelArtifact {
    pub fn new(model: TrainedModel, training_meta: TrainingMeta) -> Self {
        ModelArtifact {
            format_version: FORMAT_VERSION,
            model,
            training_meta,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format_version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.format_version != FORMAT_VERSION {
            return Err(DemandError::Format(format!(
                "format version {} (supported: {FORMAT_VERSION})",
                header.format_version
            )));
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|source| DemandError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| DemandError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arima::{fit_arima, ArimaOrder};
    use crate::ensemble::{fit_ensemble, EnsembleParams};
    use crate::forest::ForestParams;
    use crate::gbt::GbtParams;
    use crate::mlp::MlpParams;
    use ndarray::Array2;

    fn small_ensemble() -> Ensemble {
        let x = Array2::from_shape_fn((30, 3), |(i, j)| ((i * 13 + j * 7) % 17) as f64 / 3.0);
        let y = x.column(1).mapv(|v| v.sin() + 0.1);
        let params = EnsembleParams {
            forest: ForestParams {
                n_trees: 3,
                ..ForestParams::default()
            },
            gbt: GbtParams {
                n_rounds: 4,
                ..GbtParams::default()
            },
            mlp: MlpParams {
                hidden: 5,
                max_epochs: 5,
                ..MlpParams::default()
            },
            ..EnsembleParams::default()
        };
        fit_ensemble(x.view(), y.view(), &params).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let meta = TrainingMeta {
            hyperparameters: serde_json::json!({"alpha": 0.1}),
            seed: 9,
            train_start: NaiveDate::from_ymd_opt(2024, 1, 1),
            train_end: NaiveDate::from_ymd_opt(2024, 3, 30),
            feature_columns: vec!["a".into(), "b".into(), "c".into()],
        };
        let artifact = ModelArtifact::new(TrainedModel::Ensemble(small_ensemble()), meta);
        let text = artifact.to_json().unwrap();
        let back = ModelArtifact::from_json(&text).unwrap();
        assert_eq!(back, artifact);
        assert_eq!(back.to_json().unwrap(), text);
        let x = Array2::from_elem((2, 3), 0.37);
        let p0 = artifact.model.predict(x.view()).unwrap();
        let p1 = back.model.predict(x.view()).unwrap();
        assert_eq!(p0, p1);
    }

    #[test]
    fn file_round_trip_and_version_check() {
        let y: Vec<f64> = (0..40).map(|t| (t as f64 * 0.3).sin() * 1.0 / 3.0).collect();
        let arima = fit_arima(&y, ArimaOrder::new(1, 0, 0)).unwrap();
        let artifact = ModelArtifact::new(TrainedModel::Arima(arima), TrainingMeta::default());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        artifact.save(&path).unwrap();
        assert_eq!(ModelArtifact::load(&path).unwrap(), artifact);
        assert!(artifact.model.predict(Array2::zeros((1, 1)).view()).is_err());

        let text = artifact
            .to_json()
            .unwrap()
            .replacen("\"format_version\":1", "\"format_version\":2", 1);
        assert!(matches!(
            ModelArtifact::from_json(&text),
            Err(DemandError::Format(_))
        ));
        assert!(matches!(
            ModelArtifact::load(&dir.path().join("missing.json")),
            Err(DemandError::Io { .. })
        ));
    }

    #[test]
    fn kind_tags() {
        let artifact = ModelArtifact::new(
            TrainedModel::Arima(fit_arima(&[1.0; 12], ArimaOrder::new(0, 0, 0)).unwrap()),
            TrainingMeta::default(),
        );
        let v: serde_json::Value = serde_json::from_str(&artifact.to_json().unwrap()).unwrap();
        assert_eq!(v["model"]["kind"], "arima");
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
            assert_eq!(serde_json::to_value(k).unwrap(), k.as_str());
        }
    }
}
