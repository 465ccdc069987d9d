//! End-to-end runs and the single-stage commands that resume from a run
//! directory.

use pricewise_core::elasticity::{read_elasticities, write_elasticities};
use pricewise_core::features::embedding::EmbeddingTable;
use pricewise_core::ingest::Dataset;

use crate::config::PipelineConfig;
use crate::error::{Result, Stage, StageContext};
use crate::layout::{write_json, RunLayout};
use crate::lock::RunLock;
use crate::manifest::Manifest;
use crate::report::{emit_report, Report};
use crate::stages::demand::{self, Prediction};
use crate::stages::elasticity;
use crate::stages::features::{self, FeatureSet};
use crate::stages::ingest::{ingest, IngestSummary};
use crate::stages::optimize::{self, OptimizeOutcome};

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub manifest: Manifest,
    pub optimized: OptimizeOutcome,
    pub report: Report,
}

/// Runs every stage in order, writing each stage's outputs into the run
/// directory. The manifest is written whether or not a stage fails.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let layout = RunLayout::new(&config.run_dir);
    let _lock = RunLock::acquire(layout.root())?;
    layout.create()?;
    config.save(&layout.config())?;
    let mut manifest = Manifest::new(config);
    let result = run_stages(config, &layout, &mut manifest);
    write_json(&layout.manifest(), &manifest)?;
    let optimized = result?;
    let report = emit_report(layout.root())?;
    Ok(PipelineOutcome {
        manifest,
        optimized,
        report,
    })
}

fn run_stages(
    config: &PipelineConfig,
    layout: &RunLayout,
    manifest: &mut Manifest,
) -> Result<OptimizeOutcome> {
    let dataset = manifest.record(Stage::Ingest, || load(config, layout))?;
    manifest.as_of = Some(dataset.as_of);
    let (embeddings, set) = manifest.record(Stage::Features, || featurize(config, layout, &dataset))?;
    let predictions = manifest.record(Stage::Demand, || {
        let trained = train(config, layout, &set)?;
        predict(config, layout, &dataset, &set, Some(&trained))
    })?;
    let elasticities = manifest.record(Stage::Elasticity, || {
        let estimates = elasticity::estimate(config, &dataset, &embeddings)?;
        write_elasticities(&layout.elasticities(), &estimates)?;
        Ok(estimates)
    })?;
    manifest.record(Stage::Optimize, || {
        let outcome = optimize::optimize(config, &dataset, &predictions, &elasticities)?;
        optimize::write_outputs(layout, &outcome)?;
        Ok(outcome)
    })
}

fn load(config: &PipelineConfig, layout: &RunLayout) -> Result<Dataset> {
    let loaded = ingest(config)?;
    write_json(&layout.ingest_summary(), &IngestSummary::of(&loaded))?;
    Ok(loaded.dataset)
}

fn featurize(
    config: &PipelineConfig,
    layout: &RunLayout,
    dataset: &Dataset,
) -> Result<(EmbeddingTable, FeatureSet)> {
    let embeddings = features::train_embeddings(config, dataset)?;
    embeddings.write_text(&layout.embeddings())?;
    let set = features::assemble(config, dataset, &embeddings)?;
    features::write_forecast_rows(&layout.features(), &set)?;
    Ok((embeddings, set))
}

/// Trains, saves the models and the holdout scores, and keeps the models
/// for `predict`.
fn train(
    config: &PipelineConfig,
    layout: &RunLayout,
    set: &FeatureSet,
) -> Result<Vec<demand::TrainedPartition>> {
    let (trained, eval) = demand::train(config, set)?;
    demand::save_models(layout, &trained)?;
    write_json(&layout.eval(), &eval)?;
    Ok(trained)
}

/// Predicts with `trained`, or with the saved models when `None`.
fn predict(
    config: &PipelineConfig,
    layout: &RunLayout,
    dataset: &Dataset,
    set: &FeatureSet,
    trained: Option<&[demand::TrainedPartition]>,
) -> Result<Vec<Prediction>> {
    let loaded;
    let trained = match trained {
        Some(t) => t,
        None => {
            loaded = demand::load_models(layout, config, set)?;
            &loaded
        }
    };
    let predictions = demand::predict(config, dataset, set, trained)?;
    demand::write_predictions(&layout.predictions(), &predictions)?;
    Ok(predictions)
}

/// A pipeline step run on its own against an existing run directory.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum StageCommand {
    Ingest,
    Featurize,
    Train,
    Predict,
    Elasticity,
    Optimize,
}

impl StageCommand {
    pub fn stage(self) -> Stage {
        match self {
            StageCommand::Ingest => Stage::Ingest,
            StageCommand::Featurize => Stage::Features,
            StageCommand::Train | StageCommand::Predict => Stage::Demand,
            StageCommand::Elasticity => Stage::Elasticity,
            StageCommand::Optimize => Stage::Optimize,
        }
    }
}

/// Runs one step, reading earlier stages' outputs from the run directory.
pub fn run_stage_command(config: &PipelineConfig, command: StageCommand) -> Result<()> {
    config.validate()?;
    let layout = RunLayout::new(&config.run_dir);
    let _lock = RunLock::acquire(layout.root())?;
    layout.create()?;
    let dataset = load(config, &layout).in_stage(Stage::Ingest)?;
    let saved_embeddings = || EmbeddingTable::read_text(&layout.embeddings());
    let run = || -> Result<()> {
        match command {
            StageCommand::Ingest => Ok(()),
            StageCommand::Featurize => featurize(config, &layout, &dataset).map(drop),
            StageCommand::Train => {
                let set = features::assemble(config, &dataset, &saved_embeddings()?)?;
                train(config, &layout, &set).map(drop)
            }
            StageCommand::Predict => {
                let set = features::assemble(config, &dataset, &saved_embeddings()?)?;
                predict(config, &layout, &dataset, &set, None).map(drop)
            }
            StageCommand::Elasticity => {
                let estimates = elasticity::estimate(config, &dataset, &saved_embeddings()?)?;
                Ok(write_elasticities(&layout.elasticities(), &estimates)?)
            }
            StageCommand::Optimize => {
                let predictions = demand::read_predictions(&layout.predictions())?;
                let elasticities = read_elasticities(&layout.elasticities())?;
                let outcome = optimize::optimize(config, &dataset, &predictions, &elasticities)?;
                optimize::write_outputs(&layout, &outcome)
            }
        }
    };
    run().in_stage(command.stage())
}
