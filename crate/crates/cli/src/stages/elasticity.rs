use std::collections::BTreeMap;

use pricewise_core::elasticity::{
    clamp_elasticity, cold_start_elasticity, estimate_elasticity, ElasticityEstimate, ElasticityMethod,
    Estimation,
};
use pricewise_core::features::embedding::EmbeddingTable;
use pricewise_core::ingest::Dataset;

use super::{partition_of, partitions};
use crate::config::PipelineConfig;
use crate::error::Result;

/// One estimate per catalog product, in catalog order.
///
/// Products with fewer than two distinct prices borrow from their embedding
/// neighbours. A product that has neither an embedding nor neighbours takes
/// the mean estimate of its partition (0 if the partition has none).
pub fn estimate(
    config: &PipelineConfig,
    dataset: &Dataset,
    embeddings: &EmbeddingTable,
) -> Result<Vec<ElasticityEstimate>> {
    let as_of = dataset.as_of;
    let mut slots: Vec<Option<ElasticityEstimate>> = Vec::with_capacity(dataset.catalog.len());
    for entry in &dataset.catalog {
        let history = dataset.history_for(&entry.product_id);
        slots.push(match history {
            [] => None,
            _ => match estimate_elasticity(history, as_of)? {
                Estimation::Estimated(e) => Some(e),
                Estimation::NeedsColdStart { .. } => None,
            },
        });
    }
    let known: Vec<ElasticityEstimate> = slots.iter().flatten().cloned().collect();

    let names = partition_of(dataset, &partitions(dataset, config.partition_key));
    let mut partition_sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (slot, name) in slots.iter().zip(&names) {
        if let Some(e) = slot {
            let s = partition_sums.entry(name.as_str()).or_default();
            s.0 += e.ed;
            s.1 += 1;
        }
    }

    let mut cold = 0;
    let out = slots
        .into_iter()
        .zip(&dataset.catalog)
        .zip(&names)
        .map(|((slot, entry), name)| {
            if let Some(e) = slot {
                return e;
            }
            cold += 1;
            let id = &entry.product_id;
            cold_start_elasticity(id, embeddings, &known, config.cold_start_k, as_of).unwrap_or_else(|e| {
                log::debug!("cold start for {id} fell back to the partition mean: {e}");
                let ed = match partition_sums.get(name.as_str()) {
                    Some(&(sum, n)) => sum / n as f64,
                    None => 0.0,
                };
                ElasticityEstimate {
                    product_id: id.clone(),
                    ed: clamp_elasticity(ed),
                    method: ElasticityMethod::ColdStart,
                    n_points: 0,
                    updated_on: as_of,
                }
            })
        })
        .collect();
    log::info!(
        "{} of {} products needed a cold start",
        cold,
        dataset.catalog.len()
    );
    Ok(out)
}
