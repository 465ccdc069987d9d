//! The four feature families feeding the demand models.
//!
//! * observed: that day's sales and browsing counts,
//! * engineered: trailing 7-day sales and visibility, BAG sales share, day of week,
//! * sort rank: the product's search score,
//! * embedding: a skip-gram vector learned from user interaction sequences.
//!
//! A row assembled for target day `t` uses observed signals from `t - 1` and
//! the engineered window `[t - 7, t - 1]`, so no feature sees the label.

pub mod embedding;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::types::{EventType, Gender, ProductId};

pub use embedding::{train_product_embeddings, EmbeddingConfig, EmbeddingTable, TrainingMeta};

/// Trailing window length for engineered features.
pub const WINDOW_DAYS: u64 = 7;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservedFeatures {
    pub quantity_sold: f64,
    pub list_count: f64,
    pub pdp_count: f64,
    pub cart_count: f64,
    pub inventory: f64,
}

impl ObservedFeatures {
    pub const NAMES: [&'static str; 5] = [
        "quantity_sold",
        "list_count",
        "pdp_count",
        "cart_count",
        "inventory",
    ];

    pub fn values(&self) -> [f64; 5] {
        [
            self.quantity_sold,
            self.list_count,
            self.pdp_count,
            self.cart_count,
            self.inventory,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineeredFeatures {
    pub sales_7d: f64,
    pub visibility_7d: f64,
    pub bag_ratio: f64,
    pub day_of_week: Weekday,
}

impl EngineeredFeatures {
    pub const NAMES: [&'static str; 10] = [
        "sales_7d",
        "visibility_7d",
        "bag_ratio",
        "dow_mon",
        "dow_tue",
        "dow_wed",
        "dow_thu",
        "dow_fri",
        "dow_sat",
        "dow_sun",
    ];

    pub fn values(&self) -> [f64; 10] {
        let mut out = [0.0; 10];
        out[0] = self.sales_7d;
        out[1] = self.visibility_7d;
        out[2] = self.bag_ratio;
        out[3 + self.day_of_week.num_days_from_monday() as usize] = 1.0;
        out
    }
}

/// One assembled model input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub product_id: ProductId,
    /// The day whose demand this row describes.
    pub date: NaiveDate,
    pub observed: ObservedFeatures,
    pub engineered: EngineeredFeatures,
    pub sort_score: f64,
    pub embedding: Vec<f64>,
}

impl FeatureVector {
    pub fn values(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(16 + self.embedding.len());
        v.extend_from_slice(&self.observed.values());
        v.extend_from_slice(&self.engineered.values());
        v.push(self.sort_score);
        v.extend_from_slice(&self.embedding);
        v
    }
}

/// Column names in matrix order for an embedding of `dimension`.
pub fn column_names(dimension: usize) -> Vec<String> {
    ObservedFeatures::NAMES
        .iter()
        .chain(EngineeredFeatures::NAMES.iter())
        .map(|s| s.to_string())
        .chain(std::iter::once("sort_score".to_string()))
        .chain((0..dimension).map(|i| format!("emb_{i}")))
        .collect()
}

/// Rows for one day plus labels (quantity sold on that day), aligned by product.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<FeatureVector>,
    pub labels: Vec<f64>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// Row-major dense values.
    pub fn dense(&self) -> Vec<f64> {
        self.rows.iter().flat_map(|r| r.values()).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        write!(w, "product_id,date").map_err(io)?;
        for c in &self.columns {
            write!(w, ",{c}").map_err(io)?;
        }
        writeln!(w, ",label").map_err(io)?;
        for (row, label) in self.rows.iter().zip(&self.labels) {
            write!(w, "{},{}", row.product_id, row.date).map_err(io)?;
            for v in row.values() {
                write!(w, ",{v}").map_err(io)?;
            }
            writeln!(w, ",{label}").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Pre-indexed view of a dataset for repeated feature queries.
pub struct FeatureContext<'a> {
    data: &'a Dataset,
    index: HashMap<&'a ProductId, usize>,
    range: Option<(NaiveDate, NaiveDate)>,
    /// (product, day) -> (quantity, inventory)
    sales: HashMap<(usize, NaiveDate), (u32, u32)>,
    /// (product, day) -> counts per event type
    events: HashMap<(usize, NaiveDate), [u32; 5]>,
    first_seen: Vec<Option<NaiveDate>>,
    bag_group: Vec<usize>,
    n_groups: usize,
}

impl<'a> FeatureContext<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        let index: HashMap<&ProductId, usize> = data
            .catalog
            .iter()
            .enumerate()
            .map(|(i, e)| (&e.product_id, i))
            .collect();
        let mut sales = HashMap::new();
        let mut first_seen = vec![None; data.catalog.len()];
        for o in &data.price_history {
            if let Some(&i) = index.get(&o.product_id) {
                sales.insert((i, o.date), (o.quantity_sold, o.inventory));
                let f: &mut Option<NaiveDate> = &mut first_seen[i];
                if f.is_none_or(|d| o.date < d) {
                    *f = Some(o.date);
                }
            }
        }
        let mut events: HashMap<(usize, NaiveDate), [u32; 5]> = HashMap::new();
        for ev in &data.clickstream {
            if let Some(&i) = index.get(&ev.product_id) {
                events.entry((i, ev.timestamp.date())).or_default()[ev.event_type.index()] += 1;
            }
        }
        let mut groups: BTreeMap<(&str, &str, Gender), usize> = BTreeMap::new();
        let bag_group = data
            .catalog
            .iter()
            .map(|e| {
                let next = groups.len();
                *groups.entry(e.bag_key()).or_insert(next)
            })
            .collect();
        FeatureContext {
            data,
            index,
            range: data.history_range(),
            sales,
            events,
            first_seen,
            bag_group,
            n_groups: groups.len(),
        }
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.data
    }

    fn check_in_range(&self, day: NaiveDate) -> Result<()> {
        match self.range {
            Some((first, last)) if day >= first && day <= last => Ok(()),
            Some((first, last)) => Err(Error::domain(format!(
                "day {day} outside price history range {first}..={last}"
            ))),
            None => Err(Error::domain("price history is empty")),
        }
    }

    fn observed_at(&self, i: usize, day: NaiveDate) -> ObservedFeatures {
        let (q, inv) = self.sales.get(&(i, day)).copied().unwrap_or((0, 0));
        let ev = self.events.get(&(i, day)).copied().unwrap_or_default();
        ObservedFeatures {
            quantity_sold: f64::from(q),
            list_count: f64::from(ev[EventType::List.index()]),
            pdp_count: f64::from(ev[EventType::Pdp.index()]),
            cart_count: f64::from(ev[EventType::Cart.index()]),
            inventory: f64::from(inv),
        }
    }

    /// Observed counts for every catalog product on `day`.
    pub fn observed(&self, day: NaiveDate) -> Result<Vec<ObservedFeatures>> {
        self.check_in_range(day)?;
        Ok((0..self.data.catalog.len())
            .map(|i| self.observed_at(i, day))
            .collect())
    }

    /// Engineered features describing `day` from the window `[day - 7, day - 1]`.
    pub fn engineered(&self, day: NaiveDate) -> Result<Vec<EngineeredFeatures>> {
        let window_start = day
            .checked_sub_days(Days::new(WINDOW_DAYS))
            .ok_or_else(|| Error::domain("date underflow"))?;
        if let Some((_, last)) = self.range {
            if day > last + Days::new(1) {
                return Err(Error::domain(format!(
                    "day {day} is more than one day past the history end {last}"
                )));
            }
        }
        let n = self.data.catalog.len();
        let mut sales = vec![0.0; n];
        let mut visibility = vec![0.0; n];
        for i in 0..n {
            match self.first_seen[i] {
                Some(f) if f <= window_start => {}
                _ => {
                    return Err(Error::domain(format!(
                        "insufficient history for product {}: need {WINDOW_DAYS} days before {day}",
                        self.data.catalog[i].product_id
                    )))
                }
            }
            let mut d = window_start;
            while d < day {
                if let Some(&(q, _)) = self.sales.get(&(i, d)) {
                    sales[i] += f64::from(q);
                }
                if let Some(ev) = self.events.get(&(i, d)) {
                    visibility[i] += f64::from(ev[EventType::List.index()] + ev[EventType::Pdp.index()]);
                }
                d = d + Days::new(1);
            }
        }
        let mut group_total = vec![0.0; self.n_groups];
        for i in 0..n {
            group_total[self.bag_group[i]] += sales[i];
        }
        Ok((0..n)
            .map(|i| {
                let total = group_total[self.bag_group[i]];
                EngineeredFeatures {
                    sales_7d: sales[i],
                    visibility_7d: visibility[i],
                    bag_ratio: if total > 0.0 { sales[i] / total } else { 0.0 },
                    day_of_week: day.weekday(),
                }
            })
            .collect())
    }

    /// Search score per catalog product; unranked products score 0.
    pub fn sort_scores(&self) -> Result<Vec<f64>> {
        let mut scores = vec![None; self.data.catalog.len()];
        for r in &self.data.sort_ranks {
            let Some(&i) = self.index.get(&r.product_id) else {
                continue;
            };
            if scores[i].is_some() {
                return Err(Error::domain(format!(
                    "duplicate rank row for product {}",
                    r.product_id
                )));
            }
            scores[i] = Some(r.score);
        }
        Ok(scores.into_iter().map(|s| s.unwrap_or(0.0)).collect())
    }

    /// Feature rows describing `day` for every catalog product, in catalog order.
    /// `day` may be one past the history end (the forecast day).
    pub fn rows(&self, day: NaiveDate, embeddings: &EmbeddingTable) -> Result<Vec<FeatureVector>> {
        if embeddings.is_empty() {
            return Err(Error::domain("missing embeddings"));
        }
        let prev = day
            .checked_sub_days(Days::new(1))
            .ok_or_else(|| Error::domain("date underflow"))?;
        let observed = self.observed(prev)?;
        let engineered = self.engineered(day)?;
        let scores = self.sort_scores()?;
        let zero = vec![0.0; embeddings.dimension];
        Ok(self
            .data
            .catalog
            .iter()
            .zip(observed)
            .zip(engineered)
            .zip(scores)
            .map(|(((entry, observed), engineered), sort_score)| FeatureVector {
                product_id: entry.product_id.clone(),
                date: day,
                observed,
                engineered,
                sort_score,
                embedding: embeddings
                    .get(&entry.product_id)
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|| zero.clone()),
            })
            .collect())
    }

    /// Rows for `day` with that day's quantity sold as label.
    pub fn matrix(&self, day: NaiveDate, embeddings: &EmbeddingTable) -> Result<FeatureMatrix> {
        self.check_in_range(day)?;
        let rows = self.rows(day, embeddings)?;
        let labels = rows
            .iter()
            .map(|r| {
                let i = self.index[&r.product_id];
                self.sales.get(&(i, day)).map_or(0.0, |&(q, _)| f64::from(q))
            })
            .collect();
        Ok(FeatureMatrix {
            columns: column_names(embeddings.dimension),
            rows,
            labels,
        })
    }
}

fn by_product<T>(d: &Dataset, values: Vec<T>) -> BTreeMap<ProductId, T> {
    d.catalog
        .iter()
        .map(|e| e.product_id.clone())
        .zip(values)
        .collect()
}

pub fn build_observed_features(d: &Dataset, day: NaiveDate) -> Result<BTreeMap<ProductId, ObservedFeatures>> {
    Ok(by_product(d, FeatureContext::new(d).observed(day)?))
}

pub fn build_engineered_features(
    d: &Dataset,
    day: NaiveDate,
) -> Result<BTreeMap<ProductId, EngineeredFeatures>> {
    Ok(by_product(d, FeatureContext::new(d).engineered(day)?))
}

pub fn attach_sort_rank(d: &Dataset) -> Result<BTreeMap<ProductId, f64>> {
    Ok(by_product(d, FeatureContext::new(d).sort_scores()?))
}

pub fn assemble_feature_matrix(
    d: &Dataset,
    day: NaiveDate,
    embeddings: &EmbeddingTable,
) -> Result<FeatureMatrix> {
    FeatureContext::new(d).matrix(day, embeddings)
}
