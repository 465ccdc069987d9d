use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use pricewise_cli::layout::{write_json, RunLayout};
use pricewise_cli::market::{ab_test, load_market, recommended_schedule, simulate_market};
use pricewise_cli::{
    emit_report, run_pipeline, run_stage_command, CliError, PartitionKey, PipelineConfig, StageCommand,
    RUN_DIR_ENV,
};
use pricewise_core::simulate::MarketSpec;
use pricewise_core::Money;
use pricewise_demand::ModelKind;

#[derive(Parser)]
#[command(
    name = "pricewise",
    version,
    about = "Daily price optimization for a product catalog"
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Settings that override the config file.
#[derive(Args)]
struct Overrides {
    /// TOML config file; unset keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[arg(long, global = true, env = RUN_DIR_ENV)]
    run_dir: Option<PathBuf>,
    /// Forecast day (YYYY-MM-DD); defaults to the day after the history.
    #[arg(long, global = true)]
    as_of: Option<NaiveDate>,
    /// Ladder half-width in discount percentage points.
    #[arg(long, global = true)]
    delta_pct: Option<u32>,
    #[arg(long, global = true)]
    sweep_steps: Option<usize>,
    /// Solve at this per-partition price budget (INR) instead of sweeping.
    #[arg(long, global = true, value_parser = parse_money)]
    fixed_c: Option<Money>,
    #[arg(long, global = true, value_parser = parse_model)]
    model: Option<ModelKind>,
    #[arg(long, global = true, value_enum)]
    partition_key: Option<PartitionKey>,
    #[arg(long, global = true)]
    train_days: Option<usize>,
    #[arg(long, global = true)]
    embedding_dim: Option<usize>,
    #[arg(long, global = true)]
    embedding_epochs: Option<usize>,
    /// Seed for every stochastic component.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

fn parse_money(s: &str) -> Result<Money, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e| format!("{e}"))
}

impl Overrides {
    fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.data_dir {
            c.data_dir.clone_from(v);
        }
        if let Some(v) = &self.run_dir {
            c.run_dir.clone_from(v);
        }
        if self.as_of.is_some() {
            c.as_of = self.as_of;
        }
        if let Some(v) = self.delta_pct {
            c.delta_pct = v;
        }
        if let Some(v) = self.sweep_steps {
            c.sweep_steps = v;
        }
        if self.fixed_c.is_some() {
            c.fixed_c = self.fixed_c;
        }
        if let Some(v) = self.model {
            c.demand.model = v;
        }
        if let Some(v) = self.partition_key {
            c.partition_key = v;
        }
        if let Some(v) = self.train_days {
            c.demand.train_days = v;
        }
        if let Some(v) = self.embedding_dim {
            c.embedding.dimension = v;
        }
        if let Some(v) = self.embedding_epochs {
            c.embedding.epochs = v;
        }
        if let Some(v) = self.seed {
            c.set_seed(v);
        }
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the dataset.
    Ingest,
    /// Train product embeddings and write the forecast-day feature rows.
    Featurize,
    /// Fit demand models per partition and score them on the holdout day.
    Train,
    /// Predict next-day demand with the saved models.
    Predict,
    /// Estimate per-product price elasticity.
    Elasticity,
    /// Build price ladders and choose one price per product.
    Optimize,
    /// Run every stage, then write the report.
    Pipeline,
    /// Summarize a completed run.
    Report,
    /// Write a synthetic market (dataset, spec and ground truth).
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        products: usize,
        #[arg(long, default_value_t = 0)]
        market_seed: u64,
        #[arg(long, default_value_t = 90)]
        history_days: u64,
    },
    /// A/B test recommended prices against base prices on a simulated market.
    Abtest {
        /// Directory written by `simulate`.
        #[arg(long)]
        market: PathBuf,
        /// Recommendations to test; defaults to the run directory's.
        #[arg(long)]
        assignment: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        days: u32,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        /// Show base prices to both arms.
        #[arg(long)]
        aa: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = cli.overrides.resolve()?;
    let stage = |c| run_stage_command(&config, c);
    match cli.command {
        Command::Ingest => stage(StageCommand::Ingest),
        Command::Featurize => stage(StageCommand::Featurize),
        Command::Train => stage(StageCommand::Train),
        Command::Predict => stage(StageCommand::Predict),
        Command::Elasticity => stage(StageCommand::Elasticity),
        Command::Optimize => stage(StageCommand::Optimize),
        Command::Pipeline => {
            let outcome = run_pipeline(&config)?;
            print!("{}", outcome.report.to_text());
            Ok(())
        }
        Command::Report => {
            print!("{}", emit_report(&config.run_dir)?.to_text());
            Ok(())
        }
        Command::Simulate {
            out,
            products,
            market_seed,
            history_days,
        } => {
            let spec = MarketSpec {
                history_days,
                ..MarketSpec::new(products, market_seed)
            };
            let market = simulate_market(&spec, &out)?;
            println!(
                "wrote {} products to {}; as_of {}",
                market.dataset.catalog.len(),
                out.display(),
                market.dataset.as_of
            );
            Ok(())
        }
        Command::Abtest {
            market,
            assignment,
            days,
            split_seed,
            aa,
        } => {
            let layout = RunLayout::new(&config.run_dir);
            let m = load_market(&market)?;
            let treatment = if aa {
                None
            } else {
                let path = assignment.unwrap_or_else(|| layout.assignment());
                Some(recommended_schedule(&m, &path)?)
            };
            let report = ab_test(&m, treatment.as_ref(), days, split_seed)?;
            if layout.root().is_dir() {
                write_json(&layout.root().join("ab_report.json"), &report)?;
            }
            println!("{}", report.to_json());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
