//! The five pipeline stages. Each exposes a compute step and, where the
//! stage produces files, a writer and a reader so subcommands can resume
//! from a run directory.

pub mod demand;
pub mod elasticity;
pub mod features;
pub mod ingest;
pub mod optimize;

use std::collections::BTreeMap;

use pricewise_core::ingest::Dataset;

use crate::config::PartitionKey;

/// Catalog products that are optimized together.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub name: String,
    /// Ascending catalog indices.
    pub members: Vec<usize>,
}

/// Partitions ordered by name.
pub fn partitions(dataset: &Dataset, key: PartitionKey) -> Vec<Partition> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, entry) in dataset.catalog.iter().enumerate() {
        groups.entry(key.of(entry)).or_default().push(i);
    }
    groups
        .into_iter()
        .map(|(name, members)| Partition { name, members })
        .collect()
}

/// Partition name of every catalog product.
pub fn partition_of(dataset: &Dataset, parts: &[Partition]) -> Vec<String> {
    let mut names = vec![String::new(); dataset.catalog.len()];
    for p in parts {
        for &i in &p.members {
            names[i].clone_from(&p.name);
        }
    }
    names
}
