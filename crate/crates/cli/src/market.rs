//! Synthetic markets on disk and A/B tests against them.

use std::path::Path;

use pricewise_core::ingest::write_dataset;
use pricewise_core::simulate::{generate_market, run_ab_test, AbReport, Market, MarketSpec, PriceSchedule};

use crate::error::{CliError, Result};
use crate::layout::{read_json, write_json};
use crate::stages::optimize::read_schedule;

pub const MARKET_FILE: &str = "market.json";
pub const TRUTH_FILE: &str = "truth.csv";

/// Generates a market and writes its dataset, spec and ground truth to `dir`.
pub fn simulate_market(spec: &MarketSpec, dir: &Path) -> Result<Market> {
    let market = generate_market(spec)?;
    write_dataset(&market.dataset, dir)?;
    write_json(&dir.join(MARKET_FILE), spec)?;
    let path = dir.join(TRUTH_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::artifact(&path, e))?;
    for t in &market.truth {
        w.serialize(t).map_err(|e| CliError::artifact(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(market)
}

/// Regenerates the market whose spec was written to `dir`.
pub fn load_market(dir: &Path) -> Result<Market> {
    let spec: MarketSpec = read_json(&dir.join(MARKET_FILE))?;
    Ok(generate_market(&spec)?)
}

/// Base prices overridden by the recommendations in `assignment`.
pub fn recommended_schedule(market: &Market, assignment: &Path) -> Result<PriceSchedule> {
    let mut schedule = PriceSchedule::baseline(&market.dataset)?;
    schedule.extend(read_schedule(assignment)?.0);
    Ok(schedule)
}

/// Baseline prices against `treatment` (or against themselves for an A/A test).
pub fn ab_test(
    market: &Market,
    treatment: Option<&PriceSchedule>,
    days: u32,
    split_seed: u64,
) -> Result<AbReport> {
    let baseline = PriceSchedule::baseline(&market.dataset)?;
    Ok(run_ab_test(
        market,
        &baseline,
        treatment.unwrap_or(&baseline),
        days,
        split_seed,
    )?)
}
