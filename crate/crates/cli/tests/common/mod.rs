//! Fixture market and a configuration small enough for quick runs.

#![allow(dead_code)]

use std::path::Path;

use pricewise_cli::market::simulate_market;
use pricewise_cli::{PartitionKey, PipelineConfig};
use pricewise_core::simulate::MarketSpec;

pub const FIXTURE_PRODUCTS: usize = 120;

pub fn write_market(dir: &Path, products: usize, seed: u64) {
    simulate_market(&MarketSpec::new(products, seed), dir).expect("fixture market");
}

pub fn fast_config(data: &Path, run: &Path) -> PipelineConfig {
    let mut c = PipelineConfig {
        data_dir: data.to_path_buf(),
        run_dir: run.to_path_buf(),
        sweep_steps: 11,
        ..PipelineConfig::default()
    };
    c.embedding.epochs = 2;
    c.embedding.dimension = 8;
    c.demand.train_days = 4;
    c.demand.forest.n_trees = 5;
    c.demand.gbt.n_rounds = 10;
    c.demand.mlp.hidden = 8;
    c.demand.mlp.max_epochs = 10;
    c
}

pub fn single_partition(mut c: PipelineConfig) -> PipelineConfig {
    c.partition_key = PartitionKey::None;
    c
}
