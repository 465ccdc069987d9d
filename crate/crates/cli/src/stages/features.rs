use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{Days, NaiveDate};
use ndarray::Array2;
use pricewise_core::features::embedding::{train_product_embeddings, EmbeddingTable};
use pricewise_core::features::{column_names, FeatureContext, FeatureMatrix, FeatureVector, WINDOW_DAYS};
use pricewise_core::ingest::Dataset;
use pricewise_core::ProductId;

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};

pub fn train_embeddings(config: &PipelineConfig, dataset: &Dataset) -> Result<EmbeddingTable> {
    let table = train_product_embeddings(&dataset.clickstream, &config.embedding)?;
    log::info!(
        "trained {}-dimensional embeddings for {} products",
        table.dimension,
        table.len()
    );
    Ok(table)
}

/// Model inputs for the demand stage.
#[derive(Clone, Debug)]
pub struct FeatureSet {
    /// Products with enough history for every training window, with their
    /// observations. Catalog order.
    pub modelled: Dataset,
    /// Catalog products left out of `modelled`.
    pub excluded: Vec<ProductId>,
    pub columns: Vec<String>,
    /// Training target days, oldest first.
    pub days: Vec<NaiveDate>,
    /// One matrix per training day, rows aligned with `modelled.catalog`.
    pub training: Vec<FeatureMatrix>,
    /// Rows describing the forecast day, aligned with `modelled.catalog`.
    pub forecast: Vec<FeatureVector>,
}

impl FeatureSet {
    pub fn forecast_day(&self) -> NaiveDate {
        self.modelled.as_of
    }
}

/// The `train_days` days before `as_of`, oldest first, checked against
/// the history so each has a full feature window.
pub fn training_days(dataset: &Dataset, train_days: usize) -> Result<Vec<NaiveDate>> {
    let as_of = dataset.as_of;
    let (first, _) = dataset
        .history_range()
        .ok_or_else(|| CliError::Config("price history is empty".into()))?;
    let available = (as_of - first).num_days() - WINDOW_DAYS as i64;
    if (train_days as i64) > available {
        return Err(CliError::Config(format!(
            "train_days {train_days} needs {} days of history before {as_of}, found {}",
            train_days as u64 + WINDOW_DAYS,
            (as_of - first).num_days()
        )));
    }
    Ok((1..=train_days as u64)
        .rev()
        .map(|k| as_of - Days::new(k))
        .collect())
}

/// Restricts the dataset to products observed on or before `since`.
fn modelled_subset(dataset: &Dataset, since: NaiveDate) -> (Dataset, Vec<ProductId>) {
    let kept: BTreeSet<&ProductId> = dataset
        .catalog
        .iter()
        .map(|e| &e.product_id)
        .filter(|id| dataset.history_for(id).first().is_some_and(|o| o.date <= since))
        .collect();
    let excluded: Vec<ProductId> = dataset
        .catalog
        .iter()
        .filter(|e| !kept.contains(&e.product_id))
        .map(|e| e.product_id.clone())
        .collect();
    if excluded.is_empty() {
        return (dataset.clone(), excluded);
    }
    let subset = Dataset {
        catalog: dataset
            .catalog
            .iter()
            .filter(|e| kept.contains(&e.product_id))
            .cloned()
            .collect(),
        price_history: dataset
            .price_history
            .iter()
            .filter(|o| kept.contains(&o.product_id))
            .cloned()
            .collect(),
        clickstream: dataset.clickstream.clone(),
        sort_ranks: dataset.sort_ranks.clone(),
        as_of: dataset.as_of,
    };
    (subset, excluded)
}

pub fn assemble(
    config: &PipelineConfig,
    dataset: &Dataset,
    embeddings: &EmbeddingTable,
) -> Result<FeatureSet> {
    let days = training_days(dataset, config.demand.train_days)?;
    let (modelled, excluded) = modelled_subset(dataset, days[0] - Days::new(WINDOW_DAYS));
    if !excluded.is_empty() {
        log::warn!("{} products lack history for the training window", excluded.len());
    }
    if modelled.catalog.is_empty() {
        return Err(CliError::Config(
            "no product has enough history to train on".into(),
        ));
    }
    let ctx = FeatureContext::new(&modelled);
    let training = days
        .iter()
        .map(|&d| ctx.matrix(d, embeddings))
        .collect::<pricewise_core::Result<Vec<_>>>()?;
    let forecast = ctx.rows(modelled.as_of, embeddings)?;
    Ok(FeatureSet {
        columns: column_names(embeddings.dimension),
        modelled,
        excluded,
        days,
        training,
        forecast,
    })
}

/// Dense `rows x features` matrix.
pub fn dense<'a>(rows: impl IntoIterator<Item = &'a FeatureVector>) -> Array2<f64> {
    let rows: Vec<Vec<f64>> = rows.into_iter().map(FeatureVector::values).collect();
    let width = rows.first().map_or(0, Vec::len);
    Array2::from_shape_vec((rows.len(), width), rows.concat()).expect("rows share a width")
}

/// Writes the forecast-day rows with a header of column names.
pub fn write_forecast_rows(path: &Path, set: &FeatureSet) -> Result<()> {
    let io = |e| CliError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    write!(w, "product_id,date").map_err(io)?;
    for c in &set.columns {
        write!(w, ",{c}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for row in &set.forecast {
        write!(w, "{},{}", row.product_id, row.date).map_err(io)?;
        for v in row.values() {
            write!(w, ",{v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}
