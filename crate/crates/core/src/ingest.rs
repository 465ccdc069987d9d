//! Loading and validating the four flat-file data sources.
//!
//! Files live together in one directory, each with a header row:
//!
//! | file                | columns                                                         |
//! |---------------------|-----------------------------------------------------------------|
//! | `catalog.csv`       | product_id,brand,article_type,gender,mrp,buying_cost,base_discount_pct,color |
//! | `price_history.csv` | product_id,date,hour,price,discount_pct,quantity_sold,inventory |
//! | `clickstream.csv`   | user_id,product_id,event_type,timestamp                         |
//! | `sort_rank.csv`     | product_id,rank,score                                           |
//!
//! Bad rows are rejected into a report rather than failing the load, unless
//! more than [`LoadOptions::max_reject_fraction`] of all rows are bad.
//! Hour-level price rows are folded into one observation per product-day.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::{discount_to_price, Money};
use crate::types::{CatalogEntry, ClickstreamEvent, DemandObservation, ProductId, SortRankRecord};

pub const CATALOG_FILE: &str = "catalog.csv";
pub const PRICE_HISTORY_FILE: &str = "price_history.csv";
pub const CLICKSTREAM_FILE: &str = "clickstream.csv";
pub const SORT_RANK_FILE: &str = "sort_rank.csv";

const CATALOG_COLUMNS: &[&str] = &[
    "product_id",
    "brand",
    "article_type",
    "gender",
    "mrp",
    "buying_cost",
    "base_discount_pct",
    "color",
];
const PRICE_COLUMNS: &[&str] = &[
    "product_id",
    "date",
    "hour",
    "price",
    "discount_pct",
    "quantity_sold",
    "inventory",
];
const CLICKSTREAM_COLUMNS: &[&str] = &["user_id", "product_id", "event_type", "timestamp"];
const SORT_RANK_COLUMNS: &[&str] = &["product_id", "rank", "score"];

/// Everything the pipeline knows on the morning of `as_of`.
///
/// Collections are kept sorted: catalog and sort ranks by product, price
/// history by (product, date), clickstream by (timestamp, user, product, type).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub catalog: Vec<CatalogEntry>,
    pub price_history: Vec<DemandObservation>,
    pub clickstream: Vec<ClickstreamEvent>,
    pub sort_ranks: Vec<SortRankRecord>,
    pub as_of: NaiveDate,
}

impl Dataset {
    /// Restores the canonical ordering of every collection.
    pub fn normalize(&mut self) {
        self.catalog.sort_by(|a, b| a.product_id.cmp(&b.product_id));
        self.price_history
            .sort_by(|a, b| (&a.product_id, a.date).cmp(&(&b.product_id, b.date)));
        self.clickstream.sort_by(|a, b| {
            (a.timestamp, &a.user_id, &a.product_id, a.event_type).cmp(&(
                b.timestamp,
                &b.user_id,
                &b.product_id,
                b.event_type,
            ))
        });
        self.sort_ranks
            .sort_by(|a, b| (&a.product_id, a.rank).cmp(&(&b.product_id, b.rank)));
    }

    pub fn product(&self, id: &ProductId) -> Option<&CatalogEntry> {
        self.catalog
            .binary_search_by(|e| e.product_id.cmp(id))
            .ok()
            .map(|i| &self.catalog[i])
    }

    /// Observations of one product in date order.
    pub fn history_for(&self, id: &ProductId) -> &[DemandObservation] {
        let start = self.price_history.partition_point(|o| &o.product_id < id);
        let end = self.price_history.partition_point(|o| &o.product_id <= id);
        &self.price_history[start..end]
    }

    /// First and last day covered by the price history.
    pub fn history_range(&self) -> Option<(NaiveDate, NaiveDate)> {
        let first = self.price_history.iter().map(|o| o.date).min()?;
        let last = self.price_history.iter().map(|o| o.date).max()?;
        Some((first, last))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationReason {
    MalformedRow,
    UnknownProduct,
    DuplicateProduct,
    NonPositiveMrp,
    CostExceedsMrp,
    DiscountOutOfRange,
    PriceMismatch,
    InvalidHour,
    DateNotBeforeAsOf,
    DuplicateRankRow,
    DuplicateRank,
    InvalidRank,
    InvalidScore,
    HistoryGap,
    HistoryEnd,
}

impl fmt::Display for ViolationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationReason::MalformedRow => "malformed row",
            ViolationReason::UnknownProduct => "unknown product",
            ViolationReason::DuplicateProduct => "duplicate product",
            ViolationReason::NonPositiveMrp => "non-positive MRP",
            ViolationReason::CostExceedsMrp => "cost exceeds MRP",
            ViolationReason::DiscountOutOfRange => "discount out of range",
            ViolationReason::PriceMismatch => "price inconsistent with discount",
            ViolationReason::InvalidHour => "invalid hour",
            ViolationReason::DateNotBeforeAsOf => "date not before as_of",
            ViolationReason::DuplicateRankRow => "duplicate rank row",
            ViolationReason::DuplicateRank => "duplicate rank",
            ViolationReason::InvalidRank => "invalid rank",
            ViolationReason::InvalidScore => "invalid score",
            ViolationReason::HistoryGap => "history gap",
            ViolationReason::HistoryEnd => "history does not end the day before as_of",
        })
    }
}

/// One broken invariant. `row` is the 1-based line number for file loads
/// (header is line 1) and the 0-based collection index for in-memory checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub file: String,
    pub row: usize,
    pub product_id: Option<ProductId>,
    pub reason: ViolationReason,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    /// Number of violations per human-readable reason.
    pub fn counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for v in &self.violations {
            *counts.entry(v.reason.to_string()).or_insert(0) += 1;
        }
        counts
    }

    pub fn has(&self, reason: &ViolationReason) -> bool {
        self.violations.iter().any(|v| &v.reason == reason)
    }

    fn push(
        &mut self,
        file: &str,
        row: usize,
        product_id: Option<&ProductId>,
        reason: ViolationReason,
        detail: impl Into<String>,
    ) {
        self.violations.push(Violation {
            file: file.to_owned(),
            row,
            product_id: product_id.cloned(),
            reason,
            detail: detail.into(),
        });
    }
}

#[derive(Clone, Debug)]
pub struct LoadOptions {
    /// Fraction of rejected rows (over all files) above which the load fails.
    pub max_reject_fraction: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            max_reject_fraction: 0.01,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub rejects: ValidationReport,
    pub total_rows: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PriceRow {
    product_id: ProductId,
    date: NaiveDate,
    hour: u8,
    price: Money,
    discount_pct: f64,
    quantity_sold: u32,
    inventory: u32,
}

fn catalog_reasons(e: &CatalogEntry) -> Vec<ViolationReason> {
    let mut out = Vec::new();
    if !e.mrp.is_positive() {
        out.push(ViolationReason::NonPositiveMrp);
    }
    if e.buying_cost > e.mrp || e.buying_cost < Money::ZERO {
        out.push(ViolationReason::CostExceedsMrp);
    }
    if !(0.0..100.0).contains(&e.base_discount_pct) {
        out.push(ViolationReason::DiscountOutOfRange);
    }
    out
}

/// Checks discount range and price/discount consistency within one paisa.
fn price_reasons(mrp: Money, price: Money, discount_pct: f64) -> Option<(ViolationReason, String)> {
    if !(0.0..100.0).contains(&discount_pct) {
        return Some((
            ViolationReason::DiscountOutOfRange,
            format!("discount {discount_pct}"),
        ));
    }
    match discount_to_price(mrp, discount_pct) {
        Ok(expected) if expected.abs_diff(price) <= Money::from_paise(1) => None,
        Ok(expected) => Some((
            ViolationReason::PriceMismatch,
            format!("price {price}, expected {expected}"),
        )),
        Err(e) => Some((ViolationReason::NonPositiveMrp, e.to_string())),
    }
}

fn check_header(path: &Path, headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    for col in expected {
        if !headers.iter().any(|h| h == *col) {
            return Err(Error::domain(format!("{}: missing column {col}", path.display())));
        }
    }
    Ok(())
}

type ParsedRows<T> = Vec<(usize, std::result::Result<T, String>)>;

fn read_rows<T: DeserializeOwned>(path: &Path, expected: &[&str]) -> Result<ParsedRows<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    check_header(path, &headers, expected)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let parsed = record
            .map_err(|e| e.to_string())
            .and_then(|r| r.deserialize::<T>(Some(&headers)).map_err(|e| e.to_string()));
        rows.push((line, parsed));
    }
    Ok(rows)
}

/// Loads and validates a dataset directory with default options.
pub fn load_dataset(root: &Path, as_of: NaiveDate) -> Result<LoadedDataset> {
    load_dataset_with(root, as_of, &LoadOptions::default())
}

pub fn load_dataset_with(root: &Path, as_of: NaiveDate, options: &LoadOptions) -> Result<LoadedDataset> {
    let paths: [PathBuf; 4] = [
        root.join(CATALOG_FILE),
        root.join(PRICE_HISTORY_FILE),
        root.join(CLICKSTREAM_FILE),
        root.join(SORT_RANK_FILE),
    ];
    for p in &paths {
        if !p.is_file() {
            return Err(Error::io(
                p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
            ));
        }
    }

    let (catalog_rows, price_rows, click_rows, rank_rows) = std::thread::scope(|s| {
        let c = s.spawn(|| read_rows::<CatalogEntry>(&paths[0], CATALOG_COLUMNS));
        let p = s.spawn(|| read_rows::<PriceRow>(&paths[1], PRICE_COLUMNS));
        let k = s.spawn(|| read_rows::<ClickstreamEvent>(&paths[2], CLICKSTREAM_COLUMNS));
        let r = s.spawn(|| read_rows::<SortRankRecord>(&paths[3], SORT_RANK_COLUMNS));
        (
            c.join().expect("catalog reader panicked"),
            p.join().expect("price reader panicked"),
            k.join().expect("clickstream reader panicked"),
            r.join().expect("sort rank reader panicked"),
        )
    });
    let (catalog_rows, price_rows, click_rows, rank_rows) =
        (catalog_rows?, price_rows?, click_rows?, rank_rows?);
    let total_rows = catalog_rows.len() + price_rows.len() + click_rows.len() + rank_rows.len();

    let mut rejects = ValidationReport::default();

    let mut catalog: BTreeMap<ProductId, CatalogEntry> = BTreeMap::new();
    for (line, row) in catalog_rows {
        let entry = match row {
            Ok(e) => e,
            Err(msg) => {
                rejects.push(CATALOG_FILE, line, None, ViolationReason::MalformedRow, msg);
                continue;
            }
        };
        if catalog.contains_key(&entry.product_id) {
            rejects.push(
                CATALOG_FILE,
                line,
                Some(&entry.product_id),
                ViolationReason::DuplicateProduct,
                "product already listed",
            );
            continue;
        }
        if let Some(reason) = catalog_reasons(&entry).into_iter().next() {
            rejects.push(CATALOG_FILE, line, Some(&entry.product_id), reason, "");
            continue;
        }
        catalog.insert(entry.product_id.clone(), entry);
    }

    // (product, date) -> accepted hour rows
    let mut hourly: BTreeMap<(ProductId, NaiveDate), Vec<PriceRow>> = BTreeMap::new();
    for (line, row) in price_rows {
        let row = match row {
            Ok(r) => r,
            Err(msg) => {
                rejects.push(PRICE_HISTORY_FILE, line, None, ViolationReason::MalformedRow, msg);
                continue;
            }
        };
        let Some(entry) = catalog.get(&row.product_id) else {
            rejects.push(
                PRICE_HISTORY_FILE,
                line,
                Some(&row.product_id),
                ViolationReason::UnknownProduct,
                "",
            );
            continue;
        };
        if row.hour > 23 {
            rejects.push(
                PRICE_HISTORY_FILE,
                line,
                Some(&row.product_id),
                ViolationReason::InvalidHour,
                format!("hour {}", row.hour),
            );
            continue;
        }
        if row.date >= as_of {
            rejects.push(
                PRICE_HISTORY_FILE,
                line,
                Some(&row.product_id),
                ViolationReason::DateNotBeforeAsOf,
                row.date.to_string(),
            );
            continue;
        }
        if let Some((reason, detail)) = price_reasons(entry.mrp, row.price, row.discount_pct) {
            rejects.push(PRICE_HISTORY_FILE, line, Some(&row.product_id), reason, detail);
            continue;
        }
        hourly
            .entry((row.product_id.clone(), row.date))
            .or_default()
            .push(row);
    }

    let mut price_history = Vec::with_capacity(hourly.len());
    for ((product_id, date), rows) in hourly {
        let mrp = catalog[&product_id].mrp;
        price_history.push(aggregate_day(product_id, date, mrp, &rows));
    }

    let mut clickstream = Vec::with_capacity(click_rows.len());
    for (line, row) in click_rows {
        let event = match row {
            Ok(e) => e,
            Err(msg) => {
                rejects.push(CLICKSTREAM_FILE, line, None, ViolationReason::MalformedRow, msg);
                continue;
            }
        };
        if !catalog.contains_key(&event.product_id) {
            rejects.push(
                CLICKSTREAM_FILE,
                line,
                Some(&event.product_id),
                ViolationReason::UnknownProduct,
                "",
            );
            continue;
        }
        if event.timestamp.date() >= as_of {
            rejects.push(
                CLICKSTREAM_FILE,
                line,
                Some(&event.product_id),
                ViolationReason::DateNotBeforeAsOf,
                event.timestamp.to_string(),
            );
            continue;
        }
        clickstream.push(event);
    }

    let mut sort_ranks = Vec::with_capacity(rank_rows.len());
    let mut seen_products = HashSet::new();
    let mut seen_ranks = HashSet::new();
    for (line, row) in rank_rows {
        let rec = match row {
            Ok(r) => r,
            Err(msg) => {
                rejects.push(SORT_RANK_FILE, line, None, ViolationReason::MalformedRow, msg);
                continue;
            }
        };
        let reason = if !catalog.contains_key(&rec.product_id) {
            Some(ViolationReason::UnknownProduct)
        } else if rec.rank == 0 {
            Some(ViolationReason::InvalidRank)
        } else if !(rec.score.is_finite() && rec.score >= 0.0) {
            Some(ViolationReason::InvalidScore)
        } else if seen_products.contains(&rec.product_id) {
            Some(ViolationReason::DuplicateRankRow)
        } else if seen_ranks.contains(&rec.rank) {
            Some(ViolationReason::DuplicateRank)
        } else {
            None
        };
        if let Some(reason) = reason {
            rejects.push(SORT_RANK_FILE, line, Some(&rec.product_id), reason, "");
            continue;
        }
        seen_products.insert(rec.product_id.clone());
        seen_ranks.insert(rec.rank);
        sort_ranks.push(rec);
    }

    if total_rows > 0 && rejects.len() as f64 > options.max_reject_fraction * total_rows as f64 {
        return Err(Error::Validation {
            rejected: rejects.len(),
            total: total_rows,
            counts: rejects.counts(),
        });
    }

    let mut dataset = Dataset {
        catalog: catalog.into_values().collect(),
        price_history,
        clickstream,
        sort_ranks,
        as_of,
    };
    dataset.normalize();

    let coverage = history_coverage(&dataset);
    if !coverage.is_empty() {
        return Err(Error::Validation {
            rejected: coverage.len(),
            total: total_rows,
            counts: coverage.counts(),
        });
    }

    Ok(LoadedDataset {
        dataset,
        rejects,
        total_rows,
    })
}

/// Folds hour rows into one day: quantities summed, price and discount
/// quantity-weighted (plain mean when nothing sold), inventory = max seen.
fn aggregate_day(product_id: ProductId, date: NaiveDate, mrp: Money, rows: &[PriceRow]) -> DemandObservation {
    let quantity: u64 = rows.iter().map(|r| u64::from(r.quantity_sold)).sum();
    let weight = |r: &PriceRow| {
        if quantity > 0 {
            f64::from(r.quantity_sold)
        } else {
            1.0
        }
    };
    let total_weight: f64 = rows.iter().map(weight).sum();
    let discount = rows.iter().map(|r| weight(r) * r.discount_pct).sum::<f64>() / total_weight;
    let price = if rows.len() == 1 {
        rows[0].price
    } else {
        discount_to_price(mrp, discount).unwrap_or(rows[0].price)
    };
    DemandObservation {
        product_id,
        date,
        price,
        discount_pct: if rows.len() == 1 {
            rows[0].discount_pct
        } else {
            discount
        },
        quantity_sold: u32::try_from(quantity).unwrap_or(u32::MAX),
        inventory: rows.iter().map(|r| r.inventory).max().unwrap_or(0),
    }
}

fn history_coverage(d: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    let dates: BTreeSet<NaiveDate> = d.price_history.iter().map(|o| o.date).collect();
    let Some(expected_end) = d.as_of.checked_sub_days(Days::new(1)) else {
        return report;
    };
    match (dates.first(), dates.last()) {
        (Some(&first), Some(&last)) => {
            if last != expected_end {
                report.push(
                    PRICE_HISTORY_FILE,
                    0,
                    None,
                    ViolationReason::HistoryEnd,
                    format!("history ends {last}, expected {expected_end}"),
                );
            }
            let mut day = first;
            while day <= last {
                if !dates.contains(&day) {
                    report.push(
                        PRICE_HISTORY_FILE,
                        0,
                        None,
                        ViolationReason::HistoryGap,
                        format!("no rows for {day}"),
                    );
                }
                day = day + Days::new(1);
            }
        }
        _ => report.push(
            PRICE_HISTORY_FILE,
            0,
            None,
            ViolationReason::HistoryEnd,
            "price history is empty",
        ),
    }
    report
}

/// Lists every invariant violation in an in-memory dataset.
pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut ids: BTreeMap<&ProductId, &CatalogEntry> = BTreeMap::new();
    for (i, e) in d.catalog.iter().enumerate() {
        if ids.insert(&e.product_id, e).is_some() {
            report.push(
                CATALOG_FILE,
                i,
                Some(&e.product_id),
                ViolationReason::DuplicateProduct,
                "",
            );
        }
        for reason in catalog_reasons(e) {
            report.push(CATALOG_FILE, i, Some(&e.product_id), reason, "");
        }
    }
    for (i, o) in d.price_history.iter().enumerate() {
        let Some(entry) = ids.get(&o.product_id) else {
            report.push(
                PRICE_HISTORY_FILE,
                i,
                Some(&o.product_id),
                ViolationReason::UnknownProduct,
                "",
            );
            continue;
        };
        if o.date >= d.as_of {
            report.push(
                PRICE_HISTORY_FILE,
                i,
                Some(&o.product_id),
                ViolationReason::DateNotBeforeAsOf,
                o.date.to_string(),
            );
        }
        if let Some((reason, detail)) = price_reasons(entry.mrp, o.price, o.discount_pct) {
            report.push(PRICE_HISTORY_FILE, i, Some(&o.product_id), reason, detail);
        }
    }
    for (i, ev) in d.clickstream.iter().enumerate() {
        if !ids.contains_key(&ev.product_id) {
            report.push(
                CLICKSTREAM_FILE,
                i,
                Some(&ev.product_id),
                ViolationReason::UnknownProduct,
                "",
            );
        }
    }
    let mut seen_products = HashSet::new();
    let mut seen_ranks = HashSet::new();
    for (i, r) in d.sort_ranks.iter().enumerate() {
        if !ids.contains_key(&r.product_id) {
            report.push(
                SORT_RANK_FILE,
                i,
                Some(&r.product_id),
                ViolationReason::UnknownProduct,
                "",
            );
        }
        if r.rank == 0 {
            report.push(
                SORT_RANK_FILE,
                i,
                Some(&r.product_id),
                ViolationReason::InvalidRank,
                "",
            );
        }
        if !(r.score.is_finite() && r.score >= 0.0) {
            report.push(
                SORT_RANK_FILE,
                i,
                Some(&r.product_id),
                ViolationReason::InvalidScore,
                "",
            );
        }
        if !seen_products.insert(&r.product_id) {
            report.push(
                SORT_RANK_FILE,
                i,
                Some(&r.product_id),
                ViolationReason::DuplicateRankRow,
                "",
            );
        }
        if !seen_ranks.insert(r.rank) {
            report.push(
                SORT_RANK_FILE,
                i,
                Some(&r.product_id),
                ViolationReason::DuplicateRank,
                "",
            );
        }
    }
    report.violations.extend(history_coverage(d).violations);
    report
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// Writes a dataset in the four-file layout read by [`load_dataset`].
/// Day-level observations are written as hour 0 rows.
pub fn write_dataset(d: &Dataset, root: &Path) -> Result<()> {
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;

    let path = root.join(CATALOG_FILE);
    let mut w = writer(&path)?;
    for e in &d.catalog {
        w.serialize(e).map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = root.join(PRICE_HISTORY_FILE);
    let mut w = writer(&path)?;
    for o in &d.price_history {
        let row = PriceRow {
            product_id: o.product_id.clone(),
            date: o.date,
            hour: 0,
            price: o.price,
            discount_pct: o.discount_pct,
            quantity_sold: o.quantity_sold,
            inventory: o.inventory,
        };
        w.serialize(row).map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = root.join(CLICKSTREAM_FILE);
    let mut w = writer(&path)?;
    if d.clickstream.is_empty() {
        w.write_record(CLICKSTREAM_COLUMNS)
            .map_err(|e| Error::csv(&path, e))?;
    }
    for ev in &d.clickstream {
        w.serialize(ev).map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = root.join(SORT_RANK_FILE);
    let mut w = writer(&path)?;
    if d.sort_ranks.is_empty() {
        w.write_record(SORT_RANK_COLUMNS)
            .map_err(|e| Error::csv(&path, e))?;
    }
    for r in &d.sort_ranks {
        w.serialize(r).map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}
