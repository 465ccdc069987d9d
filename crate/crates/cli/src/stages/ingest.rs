use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use chrono::{Days, NaiveDate};
use pricewise_core::ingest::{load_dataset_with, LoadOptions, LoadedDataset, PRICE_HISTORY_FILE};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};

/// The day after the latest price-history date.
pub fn infer_as_of(data_dir: &Path) -> Result<NaiveDate> {
    let path = data_dir.join(PRICE_HISTORY_FILE);
    let file = File::open(&path).map_err(|e| CliError::io(&path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let bad = |e: csv::Error| {
        CliError::from(pricewise_core::Error::Csv {
            path: path.clone(),
            source: e,
        })
    };
    let column = reader
        .headers()
        .map_err(bad)?
        .iter()
        .position(|h| h == "date")
        .ok_or_else(|| CliError::Config(format!("{}: missing column date", path.display())))?;
    let mut latest: Option<NaiveDate> = None;
    for record in reader.records() {
        let record = record.map_err(bad)?;
        // unparseable dates are rejected later by the loader
        if let Some(d) = record.get(column).and_then(|s| s.parse::<NaiveDate>().ok()) {
            latest = latest.max(Some(d));
        }
    }
    let latest = latest.ok_or_else(|| {
        CliError::Config(format!(
            "{} has no dated rows to infer as_of from",
            path.display()
        ))
    })?;
    Ok(latest + Days::new(1))
}

pub fn resolve_as_of(config: &PipelineConfig) -> Result<NaiveDate> {
    match config.as_of {
        Some(d) => Ok(d),
        None => infer_as_of(&config.data_dir),
    }
}

pub fn ingest(config: &PipelineConfig) -> Result<LoadedDataset> {
    let as_of = resolve_as_of(config)?;
    let options = LoadOptions {
        max_reject_fraction: config.max_reject_fraction,
    };
    let loaded = load_dataset_with(&config.data_dir, as_of, &options)?;
    if loaded.dataset.catalog.is_empty() {
        return Err(CliError::Config("catalog has no valid products".into()));
    }
    log::info!(
        "loaded {} products, {} observations, {} events as of {as_of}; {} of {} rows rejected",
        loaded.dataset.catalog.len(),
        loaded.dataset.price_history.len(),
        loaded.dataset.clickstream.len(),
        loaded.rejects.len(),
        loaded.total_rows
    );
    Ok(loaded)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub as_of: NaiveDate,
    pub products: usize,
    pub observations: usize,
    pub events: usize,
    pub total_rows: usize,
    pub rejected: BTreeMap<String, usize>,
}

impl IngestSummary {
    pub fn of(loaded: &LoadedDataset) -> Self {
        let d = &loaded.dataset;
        IngestSummary {
            as_of: d.as_of,
            products: d.catalog.len(),
            observations: d.price_history.len(),
            events: d.clickstream.len(),
            total_rows: loaded.total_rows,
            rejected: loaded.rejects.counts(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn as_of_is_day_after_latest() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join(PRICE_HISTORY_FILE),
            "product_id,date,hour\nA,2024-01-03,0\nA,2024-01-05,0\nB,2024-01-04,3\n",
        )
        .unwrap();
        assert_eq!(
            infer_as_of(dir.path()).unwrap(),
            NaiveDate::from_ymd_opt(2024, 1, 6).unwrap()
        );
    }

    #[test]
    fn missing_history_is_io() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(infer_as_of(dir.path()).unwrap_err().exit_code(), 4);
    }
}
