//! Per-partition demand models. Tabular models train on the feature
//! matrices of the training days; LSTM trains on the partition's daily
//! series; ARIMA fits one model per product.
//!
//! Every kind is first fit without the last training day and scored on it,
//! then refit on all days for the forecast.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::{s, Array1, Array2};
use pricewise_core::features::FeatureMatrix;
use pricewise_core::ingest::Dataset;
use pricewise_core::ProductId;
use pricewise_demand::metrics::{evaluate_predictions, EvalReport};
use pricewise_demand::{
    fit_arima, fit_lstm, select_arima_order, ArimaOrder, DailySeries, ModelArtifact, ModelKind, ModelSpec,
    Regressor, TrainedModel, TrainingMeta,
};
use serde::{Deserialize, Serialize};

use super::features::{dense, FeatureSet};
use super::{partition_of, partitions, Partition};
use crate::config::{DemandConfig, PipelineConfig};
use crate::error::{CliError, Result};
use crate::layout::{file_stem, RunLayout};

/// Days averaged when a product has no usable model.
const FALLBACK_DAYS: usize = 7;

#[derive(Clone, Debug, PartialEq)]
pub enum PartitionModel {
    /// One model for every product in the partition.
    Shared(Box<ModelArtifact>),
    /// ARIMA fits by product; products without a fit use the trailing mean.
    PerProduct(BTreeMap<ProductId, ModelArtifact>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedPartition {
    /// Members index `FeatureSet::modelled`.
    pub partition: Partition,
    pub model: PartitionModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionEval {
    pub partition: String,
    pub products: usize,
    pub eval: EvalReport,
}

/// Holdout scores written to `eval.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub model: ModelKind,
    pub holdout_day: NaiveDate,
    /// Pooled over partitions. For the ensemble this also scores each member.
    pub models: BTreeMap<String, EvalReport>,
    pub partitions: Vec<PartitionEval>,
    /// ARIMA products whose fit failed and fell back to the trailing mean.
    pub fallback_fits: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSource {
    Model,
    /// Trailing mean of the product's own history.
    Fallback,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub product_id: ProductId,
    pub partition: String,
    pub predicted_demand: f64,
    pub source: PredictionSource,
}

fn spec(kind: ModelKind, d: &DemandConfig) -> ModelSpec {
    match kind {
        ModelKind::LinearElasticNet => ModelSpec::LinearElasticNet(d.linear.clone()),
        ModelKind::RandomForest => ModelSpec::RandomForest(d.forest.clone()),
        ModelKind::Gbt => ModelSpec::Gbt(d.gbt.clone()),
        ModelKind::Mlp => ModelSpec::Mlp(d.mlp.clone()),
        ModelKind::Ensemble => ModelSpec::Ensemble(d.ensemble()),
        ModelKind::Lstm | ModelKind::Arima => unreachable!("{kind} is not tabular"),
    }
}

fn seed_of(kind: ModelKind, d: &DemandConfig) -> u64 {
    match kind {
        ModelKind::RandomForest | ModelKind::Ensemble => d.forest.seed,
        ModelKind::Mlp => d.mlp.seed,
        ModelKind::Lstm => d.lstm.seed,
        ModelKind::LinearElasticNet | ModelKind::Gbt | ModelKind::Arima => 0,
    }
}

fn clamp_nonnegative(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    values.into_iter().map(|v| v.max(0.0)).collect()
}

fn trailing_mean(quantities: &[f64]) -> f64 {
    let tail = &quantities[quantities.len().saturating_sub(FALLBACK_DAYS)..];
    if tail.is_empty() {
        0.0
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

fn quantities(dataset: &Dataset, id: &ProductId) -> Vec<f64> {
    dataset
        .history_for(id)
        .iter()
        .map(|o| f64::from(o.quantity_sold))
        .collect()
}

/// Each member's daily series over the days every member has observed.
fn member_series(dataset: &Dataset, members: &[usize]) -> Vec<DailySeries> {
    let histories: Vec<_> = members
        .iter()
        .map(|&i| dataset.history_for(&dataset.catalog[i].product_id))
        .collect();
    let len = histories.iter().map(|h| h.len()).min().unwrap_or(0);
    histories
        .iter()
        .map(|h| {
            let tail = &h[h.len() - len..];
            DailySeries {
                features: Array2::from_shape_fn((len, 1), |(t, _)| tail[t].discount_pct / 100.0),
                quantity: tail.iter().map(|o| f64::from(o.quantity_sold)).collect(),
            }
        })
        .collect()
}

fn without_last_day(series: &[DailySeries]) -> Vec<DailySeries> {
    series
        .iter()
        .map(|s| {
            let n = s.len() - 1;
            DailySeries {
                features: s.features.slice(s![..n, ..]).to_owned(),
                quantity: s.quantity.slice(s![..n]).to_owned(),
            }
        })
        .collect()
}

/// Holdout predictions of one partition, keyed by model name.
struct Holdout {
    predicted: BTreeMap<String, Vec<f64>>,
    actual: Vec<f64>,
}

/// Stacks the partition's rows of several daily matrices.
fn stack(days: &[FeatureMatrix], members: &[usize]) -> (Array2<f64>, Array1<f64>) {
    let x = dense(days.iter().flat_map(|m| members.iter().map(move |&i| &m.rows[i])));
    let y = days
        .iter()
        .flat_map(|m| members.iter().map(move |&i| m.labels[i]))
        .collect();
    (x, y)
}

fn train_tabular(
    config: &DemandConfig,
    set: &FeatureSet,
    part: &Partition,
) -> Result<(ModelArtifact, Holdout)> {
    let spec = spec(config.model, config);
    let (fit_days, hold_day) = set.training.split_at(set.training.len() - 1);
    let (x_fit, y_fit) = stack(fit_days, &part.members);
    let (x_hold, y_hold) = stack(hold_day, &part.members);
    let first = spec.fit(x_fit.view(), y_fit.view())?;

    let mut predicted = BTreeMap::new();
    if let TrainedModel::Ensemble(e) = &first {
        let members: [(ModelKind, &dyn Regressor); 4] = [
            (ModelKind::LinearElasticNet, &e.linear),
            (ModelKind::RandomForest, &e.forest),
            (ModelKind::Gbt, &e.gbt),
            (ModelKind::Mlp, &e.mlp),
        ];
        for (kind, member) in members {
            predicted.insert(
                kind.to_string(),
                clamp_nonnegative(member.predict(x_hold.view())?),
            );
        }
    }
    predicted.insert(
        config.model.to_string(),
        clamp_nonnegative(first.predict(x_hold.view())?),
    );

    let (x_all, y_all) = stack(&set.training, &part.members);
    let model = spec.fit(x_all.view(), y_all.view())?;
    let meta = TrainingMeta {
        hyperparameters: serde_json::to_value(&spec).expect("spec serializes"),
        seed: seed_of(config.model, config),
        train_start: set.days.first().copied(),
        train_end: set.days.last().copied(),
        feature_columns: set.columns.clone(),
    };
    Ok((
        ModelArtifact::new(model, meta),
        Holdout {
            predicted,
            actual: y_hold.to_vec(),
        },
    ))
}

fn train_lstm(config: &DemandConfig, set: &FeatureSet, part: &Partition) -> Result<(ModelArtifact, Holdout)> {
    let series = member_series(&set.modelled, &part.members);
    let shortened = without_last_day(&series);
    let first = fit_lstm(&shortened, &config.lstm)?;
    let held = clamp_nonnegative(first.predict_next(&shortened)?);
    let actual = series.iter().map(|s| s.quantity[s.len() - 1]).collect();

    let model = fit_lstm(&series, &config.lstm)?;
    let meta = TrainingMeta {
        hyperparameters: serde_json::to_value(&config.lstm).expect("params serialize"),
        seed: config.lstm.seed,
        train_start: None,
        train_end: set.days.last().copied(),
        feature_columns: vec!["discount_fraction".into(), "quantity".into()],
    };
    Ok((
        ModelArtifact::new(TrainedModel::Lstm(model), meta),
        Holdout {
            predicted: BTreeMap::from([(ModelKind::Lstm.to_string(), held)]),
            actual,
        },
    ))
}

fn arima_order(config: &DemandConfig, series: &[f64]) -> ArimaOrder {
    if config.arima_auto {
        select_arima_order(series).unwrap_or(config.arima_order)
    } else {
        config.arima_order
    }
}

/// Fitted model for `series`, or `None` when the fit fails.
fn fit_arima_or_none(config: &DemandConfig, series: &[f64]) -> Option<pricewise_demand::Arima> {
    let order = arima_order(config, series);
    match fit_arima(series, order) {
        Ok(m) => Some(m),
        Err(e) => {
            log::debug!("ARIMA{order} fit failed: {e}");
            None
        }
    }
}

fn train_arima(
    config: &DemandConfig,
    set: &FeatureSet,
    part: &Partition,
    fallbacks: &mut usize,
) -> Result<(PartitionModel, Holdout)> {
    let mut models = BTreeMap::new();
    let mut held = Vec::with_capacity(part.members.len());
    let mut actual = Vec::with_capacity(part.members.len());
    for &i in &part.members {
        let id = &set.modelled.catalog[i].product_id;
        let q = quantities(&set.modelled, id);
        let (past, last) = q.split_at(q.len() - 1);
        held.push(
            fit_arima_or_none(config, past)
                .map_or_else(|| trailing_mean(past), |m| m.forecast())
                .max(0.0),
        );
        actual.push(last[0]);
        match fit_arima_or_none(config, &q) {
            Some(m) => {
                let meta = TrainingMeta {
                    hyperparameters: serde_json::to_value(m.order).expect("order serializes"),
                    seed: 0,
                    train_start: set.modelled.history_for(id).first().map(|o| o.date),
                    train_end: set.days.last().copied(),
                    feature_columns: vec!["quantity".into()],
                };
                models.insert(id.clone(), ModelArtifact::new(TrainedModel::Arima(m), meta));
            }
            None => *fallbacks += 1,
        }
    }
    Ok((
        PartitionModel::PerProduct(models),
        Holdout {
            predicted: BTreeMap::from([(ModelKind::Arima.to_string(), held)]),
            actual,
        },
    ))
}

/// Trains every partition of the modelled products.
pub fn train(config: &PipelineConfig, set: &FeatureSet) -> Result<(Vec<TrainedPartition>, EvalSummary)> {
    let demand = &config.demand;
    let mut trained = Vec::new();
    let mut pooled: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut per_partition = Vec::new();
    let mut fallback_fits = 0;
    for part in partitions(&set.modelled, config.partition_key) {
        log::info!(
            "training {} on partition {} ({} products)",
            demand.model,
            part.name,
            part.members.len()
        );
        let (model, holdout) = match demand.model {
            ModelKind::Lstm => {
                let (a, h) = train_lstm(demand, set, &part)?;
                (PartitionModel::Shared(Box::new(a)), h)
            }
            ModelKind::Arima => train_arima(demand, set, &part, &mut fallback_fits)?,
            _ => {
                let (a, h) = train_tabular(demand, set, &part)?;
                (PartitionModel::Shared(Box::new(a)), h)
            }
        };
        let chosen = &holdout.predicted[demand.model.as_str()];
        per_partition.push(PartitionEval {
            partition: part.name.clone(),
            products: part.members.len(),
            eval: evaluate_predictions(chosen, &holdout.actual)?,
        });
        for (name, values) in holdout.predicted {
            let entry = pooled.entry(name).or_default();
            entry.0.extend(values);
            entry.1.extend_from_slice(&holdout.actual);
        }
        trained.push(TrainedPartition {
            partition: part,
            model,
        });
    }
    let models = pooled
        .into_iter()
        .map(|(name, (p, a))| Ok((name, evaluate_predictions(&p, &a)?)))
        .collect::<Result<_>>()?;
    let summary = EvalSummary {
        model: demand.model,
        holdout_day: *set.days.last().expect("at least two training days"),
        models,
        partitions: per_partition,
        fallback_fits,
    };
    Ok((trained, summary))
}

fn predict_partition(set: &FeatureSet, tp: &TrainedPartition) -> Result<Vec<f64>> {
    let members = &tp.partition.members;
    let raw = match &tp.model {
        PartitionModel::Shared(artifact) => match &artifact.model {
            TrainedModel::Lstm(m) => m.predict_next(&member_series(&set.modelled, members))?,
            model => {
                let x = dense(members.iter().map(|&i| &set.forecast[i]));
                model.predict(x.view())?.to_vec()
            }
        },
        PartitionModel::PerProduct(models) => members
            .iter()
            .map(|&i| {
                let id = &set.modelled.catalog[i].product_id;
                match models.get(id).map(|a| &a.model) {
                    Some(TrainedModel::Arima(m)) => Ok(m.forecast()),
                    Some(other) => Err(CliError::Config(format!(
                        "product {id} has a {} model where ARIMA was expected",
                        other.kind()
                    ))),
                    None => Ok(trailing_mean(&quantities(&set.modelled, id))),
                }
            })
            .collect::<Result<_>>()?,
    };
    Ok(clamp_nonnegative(raw))
}

/// Next-day demand for every catalog product of `dataset`, in catalog order.
/// Products outside the modelled set get their trailing mean.
pub fn predict(
    config: &PipelineConfig,
    dataset: &Dataset,
    set: &FeatureSet,
    trained: &[TrainedPartition],
) -> Result<Vec<Prediction>> {
    let mut by_product: BTreeMap<&ProductId, f64> = BTreeMap::new();
    for tp in trained {
        let values = predict_partition(set, tp)?;
        for (&i, v) in tp.partition.members.iter().zip(values) {
            by_product.insert(&set.modelled.catalog[i].product_id, v);
        }
    }
    let names = partition_of(dataset, &partitions(dataset, config.partition_key));
    Ok(dataset
        .catalog
        .iter()
        .zip(names)
        .map(|(e, partition)| {
            let (predicted_demand, source) = match by_product.get(&e.product_id) {
                Some(&v) => (v, PredictionSource::Model),
                None => (
                    trailing_mean(&quantities(dataset, &e.product_id)),
                    PredictionSource::Fallback,
                ),
            };
            Prediction {
                product_id: e.product_id.clone(),
                partition,
                predicted_demand,
                source,
            }
        })
        .collect())
}

/// Replaces the models directory with one file per shared model and one
/// directory of per-product files for ARIMA partitions.
pub fn save_models(layout: &RunLayout, trained: &[TrainedPartition]) -> Result<()> {
    let dir = layout.models_dir();
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    }
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    for tp in trained {
        let stem = file_stem(&tp.partition.name);
        match &tp.model {
            PartitionModel::Shared(a) => a.save(&dir.join(format!("{stem}.json")))?,
            PartitionModel::PerProduct(models) => {
                let sub = dir.join(&stem);
                fs::create_dir_all(&sub).map_err(|e| CliError::io(&sub, e))?;
                for (id, a) in models {
                    a.save(&sub.join(format!("{}.json", file_stem(id.as_str()))))?;
                }
            }
        }
    }
    Ok(())
}

fn check_kind(path: &Path, artifact: &ModelArtifact, expected: ModelKind) -> Result<()> {
    if artifact.kind() == expected {
        Ok(())
    } else {
        Err(CliError::artifact(
            path,
            format!("holds a {} model, config asks for {expected}", artifact.kind()),
        ))
    }
}

/// Reads back what `save_models` wrote for the partitions of `set`.
pub fn load_models(
    layout: &RunLayout,
    config: &PipelineConfig,
    set: &FeatureSet,
) -> Result<Vec<TrainedPartition>> {
    let dir = layout.models_dir();
    partitions(&set.modelled, config.partition_key)
        .into_iter()
        .map(|part| {
            let stem = file_stem(&part.name);
            let model = if config.demand.model == ModelKind::Arima {
                let sub = dir.join(&stem);
                let mut models = BTreeMap::new();
                for &i in &part.members {
                    let id = &set.modelled.catalog[i].product_id;
                    let path = sub.join(format!("{}.json", file_stem(id.as_str())));
                    if path.is_file() {
                        let a = ModelArtifact::load(&path)?;
                        check_kind(&path, &a, ModelKind::Arima)?;
                        models.insert(id.clone(), a);
                    }
                }
                PartitionModel::PerProduct(models)
            } else {
                let path = dir.join(format!("{stem}.json"));
                let a = ModelArtifact::load(&path)?;
                check_kind(&path, &a, config.demand.model)?;
                PartitionModel::Shared(Box::new(a))
            };
            Ok(TrainedPartition {
                partition: part,
                model,
            })
        })
        .collect()
}

pub fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::artifact(path, e))?;
    for p in predictions {
        w.serialize(p).map_err(|e| CliError::artifact(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::artifact(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::artifact(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_mean_uses_last_week() {
        let q: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(trailing_mean(&q), 7.0);
        assert_eq!(trailing_mean(&[2.0, 4.0]), 3.0);
        assert_eq!(trailing_mean(&[]), 0.0);
    }

    #[test]
    fn negative_predictions_clamped() {
        assert_eq!(clamp_nonnegative([-1.0, 0.5]), vec![0.0, 0.5]);
    }
}
