use std::collections::BTreeMap;
use std::path::Path;

use pricewise_core::elasticity::{build_price_ladder, ElasticityEstimate, LadderEntry, PriceLadder};
use pricewise_core::ingest::Dataset;
use pricewise_core::optimizer::{
    build_lp_instance, round_solution, solve_lp, sweep_budget, write_assignment_csv, write_sweep_csv,
    LpStatus, PriceAssignment, SweepRow,
};
use pricewise_core::simulate::PriceSchedule;
use pricewise_core::{Money, ProductId};
use serde::{Deserialize, Serialize};

use super::demand::Prediction;
use super::partitions;
use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::layout::{read_json, write_json, RunLayout};

#[derive(Clone, Debug, PartialEq)]
pub struct Recommendation {
    pub partition: String,
    pub ladder: PriceLadder,
    /// Index into `ladder.entries`.
    pub choice: usize,
}

impl Recommendation {
    pub fn chosen(&self) -> &LadderEntry {
        &self.ladder.entries[self.choice]
    }
}

/// Outcome of optimizing one partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub partition: String,
    pub products: usize,
    /// Budget the chosen assignment was solved at.
    pub budget: Money,
    pub total_price: Money,
    pub expected_revenue: f64,
    /// Predicted revenue with every product at its base discount.
    pub baseline_revenue: f64,
    pub failed_steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeOutcome {
    /// Catalog order.
    pub recommendations: Vec<Recommendation>,
    pub plans: Vec<PartitionPlan>,
    /// Budget sweep table per partition; empty under a fixed budget.
    pub sweeps: Vec<(String, Vec<SweepRow>)>,
}

impl OptimizeOutcome {
    pub fn schedule(&self) -> PriceSchedule {
        self.recommendations
            .iter()
            .map(|r| (r.ladder.product_id.clone(), r.chosen().price))
            .collect()
    }
}

fn lookup<'a, T>(map: &'a BTreeMap<&ProductId, T>, id: &ProductId, what: &str) -> Result<&'a T> {
    map.get(id)
        .ok_or_else(|| CliError::Config(format!("no {what} for product {id}")))
}

fn solve_partition(
    config: &PipelineConfig,
    ladders: &[PriceLadder],
) -> Result<(PriceAssignment, Money, usize, Vec<SweepRow>)> {
    match config.fixed_c {
        Some(c) => {
            let inst = build_lp_instance(ladders, c)?;
            let sol = solve_lp(&inst);
            if sol.status != LpStatus::Optimal {
                return Err(pricewise_core::Error::Infeasible(format!(
                    "LP at fixed budget {c} ended {:?}",
                    sol.status
                ))
                .into());
            }
            Ok((round_solution(&sol, &inst), c, 0, Vec::new()))
        }
        None => {
            let sweep = sweep_budget(ladders, config.sweep_steps)?;
            Ok((sweep.best, sweep.best_c, sweep.failed_steps, sweep.table))
        }
    }
}

/// Builds every product's ladder from its predicted demand and elasticity,
/// then picks one ladder entry per product, partition by partition.
pub fn optimize(
    config: &PipelineConfig,
    dataset: &Dataset,
    predictions: &[Prediction],
    elasticities: &[ElasticityEstimate],
) -> Result<OptimizeOutcome> {
    let demand: BTreeMap<&ProductId, f64> = predictions
        .iter()
        .map(|p| (&p.product_id, p.predicted_demand))
        .collect();
    let ed: BTreeMap<&ProductId, f64> = elasticities.iter().map(|e| (&e.product_id, e.ed)).collect();

    let mut slots: Vec<Option<Recommendation>> = vec![None; dataset.catalog.len()];
    let mut plans = Vec::new();
    let mut sweeps = Vec::new();
    for part in partitions(dataset, config.partition_key) {
        let ladders = part
            .members
            .iter()
            .map(|&i| {
                let entry = &dataset.catalog[i];
                let id = &entry.product_id;
                Ok(build_price_ladder(
                    entry,
                    *lookup(&demand, id, "demand prediction")?,
                    *lookup(&ed, id, "elasticity")?,
                    f64::from(config.delta_pct),
                )?)
            })
            .collect::<Result<Vec<_>>>()?;
        let (assignment, budget, failed_steps, table) = solve_partition(config, &ladders)?;
        log::info!(
            "partition {}: {} products, budget {budget}, expected revenue {:.2}",
            part.name,
            ladders.len(),
            assignment.expected_revenue
        );
        plans.push(PartitionPlan {
            partition: part.name.clone(),
            products: ladders.len(),
            budget,
            total_price: assignment.total_price,
            expected_revenue: assignment.expected_revenue,
            baseline_revenue: ladders.iter().map(|l| l.base().revenue()).sum(),
            failed_steps,
        });
        if config.fixed_c.is_none() {
            sweeps.push((part.name.clone(), table));
        }
        for ((&i, ladder), &choice) in part.members.iter().zip(ladders).zip(&assignment.choices) {
            slots[i] = Some(Recommendation {
                partition: part.name.clone(),
                ladder,
                choice,
            });
        }
    }
    Ok(OptimizeOutcome {
        recommendations: slots
            .into_iter()
            .map(|s| s.expect("every product is in a partition"))
            .collect(),
        plans,
        sweeps,
    })
}

/// One product's ladder and choice as written to `ladders.csv`. "Lower"
/// is the base discount minus delta, "upper" the base plus delta.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub product_id: ProductId,
    pub partition: String,
    pub choice: usize,
    pub lower_discount_pct: f64,
    pub lower_price: Money,
    pub lower_demand: f64,
    pub base_discount_pct: f64,
    pub base_price: Money,
    pub base_demand: f64,
    pub upper_discount_pct: f64,
    pub upper_price: Money,
    pub upper_demand: f64,
}

impl From<&Recommendation> for LadderRow {
    fn from(r: &Recommendation) -> Self {
        let [lo, base, up] = &r.ladder.entries;
        LadderRow {
            product_id: r.ladder.product_id.clone(),
            partition: r.partition.clone(),
            choice: r.choice,
            lower_discount_pct: lo.discount_pct,
            lower_price: lo.price,
            lower_demand: lo.projected_demand,
            base_discount_pct: base.discount_pct,
            base_price: base.price,
            base_demand: base.projected_demand,
            upper_discount_pct: up.discount_pct,
            upper_price: up.price,
            upper_demand: up.projected_demand,
        }
    }
}

impl From<LadderRow> for Recommendation {
    fn from(r: LadderRow) -> Self {
        let entry = |discount_pct, price, projected_demand| LadderEntry {
            discount_pct,
            price,
            projected_demand,
        };
        Recommendation {
            partition: r.partition,
            choice: r.choice,
            ladder: PriceLadder {
                product_id: r.product_id,
                entries: [
                    entry(r.lower_discount_pct, r.lower_price, r.lower_demand),
                    entry(r.base_discount_pct, r.base_price, r.base_demand),
                    entry(r.upper_discount_pct, r.upper_price, r.upper_demand),
                ],
            },
        }
    }
}

pub fn write_outputs(layout: &RunLayout, outcome: &OptimizeOutcome) -> Result<()> {
    let ladders: Vec<PriceLadder> = outcome.recommendations.iter().map(|r| r.ladder.clone()).collect();
    let assignment = PriceAssignment {
        choices: outcome.recommendations.iter().map(|r| r.choice).collect(),
        total_price: outcome.recommendations.iter().map(|r| r.chosen().price).sum(),
        expected_revenue: outcome.recommendations.iter().map(|r| r.chosen().revenue()).sum(),
    };
    write_assignment_csv(&layout.assignment(), &ladders, &assignment)?;

    let path = layout.ladders();
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::artifact(&path, e))?;
    for r in &outcome.recommendations {
        w.serialize(LadderRow::from(r))
            .map_err(|e| CliError::artifact(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;

    for (partition, table) in &outcome.sweeps {
        write_sweep_csv(&layout.sweep(partition), table)?;
    }
    write_json(&layout.plans(), &outcome.plans)
}

pub fn read_recommendations(path: &Path) -> Result<Vec<Recommendation>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::artifact(path, e))?;
    r.deserialize::<LadderRow>()
        .map(|row| {
            row.map(Recommendation::from)
                .map_err(|e| CliError::artifact(path, e))
        })
        .collect()
}

pub fn read_plans(layout: &RunLayout) -> Result<Vec<PartitionPlan>> {
    read_json(&layout.plans())
}

#[derive(Deserialize)]
struct AssignmentPrice {
    product_id: ProductId,
    chosen_price: Money,
}

/// Offered prices from an `assignment.csv`.
pub fn read_schedule(path: &Path) -> Result<PriceSchedule> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::artifact(path, e))?;
    r.deserialize::<AssignmentPrice>()
        .map(|row| {
            row.map(|a| (a.product_id, a.chosen_price))
                .map_err(|e| CliError::artifact(path, e))
        })
        .collect()
}
