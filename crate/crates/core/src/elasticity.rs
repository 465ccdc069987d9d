//! Price elasticity of demand and the three-point price ladder.
//!
//! Elasticity is `(dQ / Q) * (P / dP)` with `(Q, P)` the original
//! demand and price. Per product it is estimated from the product's own
//! price history: a log-log fit when at least five price levels were seen,
//! otherwise the arc formula over the two most recent price runs. Products
//! with a single price borrow from their nearest neighbours in embedding space.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::embedding::cosine;
use crate::features::EmbeddingTable;
use crate::money::{discount_to_price, Money};
use crate::types::{CatalogEntry, DemandObservation, ProductId};

/// Elasticities are clamped to this symmetric range.
pub const ELASTICITY_BOUND: f64 = 5.0;
/// Discounts on the ladder never leave `[0, MAX_LADDER_DISCOUNT]`.
pub const MAX_LADDER_DISCOUNT: f64 = 90.0;
/// Minimum number of distinct prices for the log-log regression.
pub const REGRESSION_MIN_PRICES: usize = 5;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElasticityMethod {
    Regression,
    Arc,
    ColdStart,
}

impl fmt::Display for ElasticityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElasticityMethod::Regression => "regression",
            ElasticityMethod::Arc => "arc",
            ElasticityMethod::ColdStart => "cold_start",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticityEstimate {
    pub product_id: ProductId,
    pub ed: f64,
    pub method: ElasticityMethod,
    /// Distinct historical prices behind the estimate (0 for cold start).
    pub n_points: usize,
    pub updated_on: NaiveDate,
}

/// Outcome of estimating from a product's own history.
#[derive(Clone, Debug, PartialEq)]
pub enum Estimation {
    Estimated(ElasticityEstimate),
    /// Fewer than two distinct prices: borrow from similar products.
    NeedsColdStart {
        product_id: ProductId,
    },
}

pub fn clamp_elasticity(ed: f64) -> f64 {
    ed.clamp(-ELASTICITY_BOUND, ELASTICITY_BOUND)
}

/// Maximal runs of consecutive days at one price: (price, mean quantity).
fn price_runs(history: &[DemandObservation]) -> Vec<(Money, f64)> {
    let mut runs: Vec<(Money, f64, usize)> = Vec::new();
    for o in history {
        match runs.last_mut() {
            Some((p, sum, n)) if *p == o.price => {
                *sum += f64::from(o.quantity_sold);
                *n += 1;
            }
            _ => runs.push((o.price, f64::from(o.quantity_sold), 1)),
        }
    }
    runs.into_iter().map(|(p, sum, n)| (p, sum / n as f64)).collect()
}

/// Slope of the least-squares line through `(x, y)`.
fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Estimates elasticity from one product's observations (any order).
pub fn estimate_elasticity(history: &[DemandObservation], updated_on: NaiveDate) -> Result<Estimation> {
    let Some(first) = history.first() else {
        return Err(Error::domain("empty history"));
    };
    let product_id = first.product_id.clone();
    let mut sorted: Vec<DemandObservation> = history.to_vec();
    sorted.sort_by_key(|o| o.date);

    // mean quantity per distinct price
    let mut levels: BTreeMap<Money, (f64, usize)> = BTreeMap::new();
    for o in &sorted {
        let e = levels.entry(o.price).or_insert((0.0, 0));
        e.0 += f64::from(o.quantity_sold);
        e.1 += 1;
    }
    let n_points = levels.len();
    if n_points < 2 {
        return Ok(Estimation::NeedsColdStart { product_id });
    }

    let level_means: Vec<(f64, f64)> = levels
        .iter()
        .map(|(p, (sum, n))| (p.as_rupees(), sum / *n as f64))
        .collect();
    if n_points >= REGRESSION_MIN_PRICES && level_means.iter().all(|&(_, q)| q > 0.0) {
        let points: Vec<(f64, f64)> = level_means.iter().map(|&(p, q)| (p.ln(), q.ln())).collect();
        return Ok(Estimation::Estimated(ElasticityEstimate {
            product_id,
            ed: clamp_elasticity(ols_slope(&points)),
            method: ElasticityMethod::Regression,
            n_points,
            updated_on,
        }));
    }

    let runs = price_runs(&sorted);
    let [.., (p_old, q_old), (p_new, q_new)] = runs.as_slice() else {
        return Err(Error::Internal(format!(
            "{product_id}: two price levels but a single price run"
        )));
    };
    let dp = (p_new.paise() - p_old.paise()) as f64;
    if dp == 0.0 {
        return Err(Error::Internal(format!("{product_id}: zero price change")));
    }
    let dq = q_new - q_old;
    let ed = if dq == 0.0 {
        0.0
    } else if *q_old == 0.0 {
        // infinite relative change; saturate toward its sign
        ELASTICITY_BOUND * (dq * dp).signum()
    } else {
        (dq * p_old.paise() as f64) / (q_old * dp)
    };
    Ok(Estimation::Estimated(ElasticityEstimate {
        product_id,
        ed: clamp_elasticity(ed),
        method: ElasticityMethod::Arc,
        n_points,
        updated_on,
    }))
}

/// Similarity-weighted mean elasticity of the `k` nearest products (by
/// cosine similarity of embeddings) that already have an estimate.
/// Negative similarities carry no weight; if no neighbour has positive
/// similarity the plain mean is used.
pub fn cold_start_elasticity(
    product_id: &ProductId,
    embeddings: &EmbeddingTable,
    known: &[ElasticityEstimate],
    k: usize,
    updated_on: NaiveDate,
) -> Result<ElasticityEstimate> {
    let target = embeddings
        .get(product_id)
        .ok_or_else(|| Error::domain(format!("no embedding for product {product_id}")))?;
    let mut neighbours: Vec<(f64, &ElasticityEstimate)> = known
        .iter()
        .filter(|e| &e.product_id != product_id)
        .filter_map(|e| embeddings.get(&e.product_id).map(|v| (cosine(target, v), e)))
        .collect();
    if neighbours.is_empty() || k == 0 {
        return Err(Error::domain(format!(
            "no known elasticity with an embedding to borrow for {product_id}"
        )));
    }
    neighbours.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.product_id.cmp(&b.1.product_id))
    });
    neighbours.truncate(k);
    let weight_sum: f64 = neighbours.iter().map(|(s, _)| s.max(0.0)).sum();
    let ed = if weight_sum > 0.0 {
        neighbours.iter().map(|(s, e)| s.max(0.0) * e.ed).sum::<f64>() / weight_sum
    } else {
        neighbours.iter().map(|(_, e)| e.ed).sum::<f64>() / neighbours.len() as f64
    };
    Ok(ElasticityEstimate {
        product_id: product_id.clone(),
        ed: clamp_elasticity(ed),
        method: ElasticityMethod::ColdStart,
        n_points: 0,
        updated_on,
    })
}

/// Demand at `new_price` by linear projection from `(base_price, base_demand)`,
/// floored at zero.
pub fn project_demand(base_price: Money, base_demand: f64, ed: f64, new_price: Money) -> f64 {
    let dp = (new_price.paise() - base_price.paise()) as f64;
    let projected = base_demand + base_demand * ed * dp / base_price.paise() as f64;
    projected.max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    pub discount_pct: f64,
    pub price: Money,
    pub projected_demand: f64,
}

impl LadderEntry {
    pub fn revenue(&self) -> f64 {
        self.price.as_rupees() * self.projected_demand
    }
}

/// Three candidate prices for one product, ordered by discount:
/// base - delta, base, base + delta.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceLadder {
    pub product_id: ProductId,
    pub entries: [LadderEntry; 3],
}

impl PriceLadder {
    pub const BASE: usize = 1;

    pub fn base(&self) -> &LadderEntry {
        &self.entries[Self::BASE]
    }

    pub fn min_price(&self) -> Money {
        self.entries.iter().map(|e| e.price).min().expect("three entries")
    }

    pub fn max_price(&self) -> Money {
        self.entries.iter().map(|e| e.price).max().expect("three entries")
    }
}

/// Builds the ladder at `base_discount_pct ± delta_pct` percentage points.
/// Discounts are clamped to `[0, 90]`; clamping may duplicate entries.
pub fn build_price_ladder(
    entry: &CatalogEntry,
    base_demand: f64,
    ed: f64,
    delta_pct: f64,
) -> Result<PriceLadder> {
    if delta_pct.is_nan() || delta_pct <= 0.0 {
        return Err(Error::domain(format!("delta must be positive, got {delta_pct}")));
    }
    let base_price = entry.base_price()?;
    let base = entry.base_discount_pct;
    let slot = |discount: f64| -> Result<LadderEntry> {
        let discount = discount.clamp(0.0, MAX_LADDER_DISCOUNT);
        let price = discount_to_price(entry.mrp, discount)?;
        Ok(LadderEntry {
            discount_pct: discount,
            price,
            projected_demand: project_demand(base_price, base_demand.max(0.0), ed, price),
        })
    };
    Ok(PriceLadder {
        product_id: entry.product_id.clone(),
        entries: [slot(base - delta_pct)?, slot(base)?, slot(base + delta_pct)?],
    })
}

pub fn write_elasticities(path: &Path, estimates: &[ElasticityEstimate]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for e in estimates {
        w.serialize(e).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_elasticities(path: &Path) -> Result<Vec<ElasticityEstimate>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::csv(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Gender;
    use chrono::Days;
    use proptest::prelude::*;

    fn day(n: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 3, 1).unwrap() + Days::new(n)
    }

    fn history(points: &[(i64, u32)]) -> Vec<DemandObservation> {
        points
            .iter()
            .enumerate()
            .map(|(i, &(price, q))| DemandObservation {
                product_id: "P".into(),
                date: day(i as u64),
                price: Money::from_rupees(price),
                discount_pct: 0.0,
                quantity_sold: q,
                inventory: 100_000,
            })
            .collect()
    }

    fn estimated(e: Estimation) -> ElasticityEstimate {
        match e {
            Estimation::Estimated(e) => e,
            other => panic!("expected an estimate, got {other:?}"),
        }
    }

    fn catalog_entry(mrp: i64, base: f64) -> CatalogEntry {
        CatalogEntry {
            product_id: "P".into(),
            brand: "b".into(),
            article_type: "a".into(),
            gender: Gender::Women,
            mrp: Money::from_rupees(mrp),
            buying_cost: Money::from_rupees(mrp / 3),
            base_discount_pct: base,
            color: "red".into(),
        }
    }

    #[test]
    fn arc_on_price_drop_example() {
        let e = estimated(estimate_elasticity(&history(&[(1400, 7), (1200, 11)]), day(9)).unwrap());
        assert_eq!(e.ed, -4.0);
        assert_eq!(e.method, ElasticityMethod::Arc);
        assert_eq!(e.n_points, 2);
        assert_eq!(e.updated_on, day(9));
    }

    #[test]
    fn arc_uses_two_most_recent_runs() {
        // runs: 1000x2 (q 5), 900x2 (q 5), 1400 (q 7), 1200 (q 11)
        let h = history(&[(1000, 5), (1000, 5), (900, 5), (900, 5), (1400, 7), (1200, 11)]);
        let e = estimated(estimate_elasticity(&h, day(9)).unwrap());
        assert_eq!(e.ed, -4.0);
        assert_eq!(e.n_points, 4);
    }

    #[test]
    fn unchanged_quantity_is_perfectly_inelastic() {
        let e = estimated(estimate_elasticity(&history(&[(1400, 7), (1200, 7)]), day(9)).unwrap());
        assert_eq!(e.ed, 0.0);
    }

    #[test]
    fn arc_from_zero_sales_saturates() {
        let e = estimated(estimate_elasticity(&history(&[(1400, 0), (1200, 3)]), day(9)).unwrap());
        assert_eq!(e.ed, -5.0);
    }

    #[test]
    fn power_law_recovered_by_regression() {
        // Q = 144e6 * P^-2 gives integral quantities at these prices
        let prices = [100i64, 200, 300, 400, 600, 1200];
        let pts: Vec<(i64, u32)> = prices
            .iter()
            .map(|&p| (p, (144_000_000 / (p * p)) as u32))
            .collect();
        let e = estimated(estimate_elasticity(&history(&pts), day(9)).unwrap());
        assert_eq!(e.method, ElasticityMethod::Regression);
        assert!((e.ed + 2.0).abs() < 1e-6, "ed={}", e.ed);
        assert_eq!(e.n_points, 6);
    }

    #[test]
    fn zero_level_falls_back_to_arc() {
        let pts = [(100, 9), (110, 8), (120, 0), (130, 6), (140, 5)];
        let e = estimated(estimate_elasticity(&history(&pts), day(9)).unwrap());
        assert_eq!(e.method, ElasticityMethod::Arc);
    }

    #[test]
    fn single_price_needs_cold_start() {
        let e = estimate_elasticity(&history(&[(1400, 7), (1400, 9)]), day(9)).unwrap();
        assert_eq!(
            e,
            Estimation::NeedsColdStart {
                product_id: "P".into()
            }
        );
        assert!(estimate_elasticity(&[], day(9)).is_err());
    }

    #[test]
    fn clamps_to_bounds() {
        let e = estimated(estimate_elasticity(&history(&[(1000, 1), (990, 50)]), day(9)).unwrap());
        assert_eq!(e.ed, -5.0);
    }

    fn table(vectors: &[(&str, Vec<f64>)]) -> EmbeddingTable {
        EmbeddingTable {
            dimension: vectors[0].1.len(),
            vectors: vectors
                .iter()
                .map(|(id, v)| (ProductId::new(*id), v.clone()))
                .collect(),
            training_meta: crate::features::TrainingMeta {
                epochs: 0,
                window: 0,
                negatives: 0,
                seed: 0,
            },
        }
    }

    fn known(id: &str, ed: f64) -> ElasticityEstimate {
        ElasticityEstimate {
            product_id: id.into(),
            ed,
            method: ElasticityMethod::Arc,
            n_points: 2,
            updated_on: day(0),
        }
    }

    #[test]
    fn cold_start_single_neighbour() {
        let t = table(&[("new", vec![1.0, 0.0]), ("a", vec![0.5, 0.5])]);
        let e = cold_start_elasticity(&"new".into(), &t, &[known("a", -3.0)], 5, day(1)).unwrap();
        assert_eq!(e.ed, -3.0);
        assert_eq!(e.method, ElasticityMethod::ColdStart);
    }

    #[test]
    fn cold_start_equidistant_neighbours() {
        let t = table(&[
            ("new", vec![1.0, 0.0]),
            ("a", vec![1.0, 1.0]),
            ("b", vec![1.0, -1.0]),
        ]);
        let e = cold_start_elasticity(
            &"new".into(),
            &t,
            &[known("a", -1.0), known("b", -3.0)],
            5,
            day(1),
        )
        .unwrap();
        assert!((e.ed + 2.0).abs() < 1e-12);
    }

    #[test]
    fn cold_start_weighted_mean_of_nearest_k() {
        // unit-norm neighbours at known angles from the target (1, 0)
        let angles = [0.1f64, 0.3, 0.5, 0.7, 0.9, 1.4];
        let eds = [-1.0, -2.0, 0.5, -4.0, 1.0, -5.0];
        let mut vecs = vec![("new".to_string(), vec![2.0, 0.0])];
        let mut ks = Vec::new();
        for (i, (a, ed)) in angles.iter().zip(eds).enumerate() {
            let id = format!("n{i}");
            vecs.push((id.clone(), vec![a.cos(), a.sin()]));
            ks.push(known(&id, ed));
        }
        let refs: Vec<(&str, Vec<f64>)> = vecs.iter().map(|(i, v)| (i.as_str(), v.clone())).collect();
        let t = table(&refs);
        let e = cold_start_elasticity(&"new".into(), &t, &ks, 5, day(1)).unwrap();
        // oracle: the five smallest angles, weights cos(angle)
        let num: f64 = angles[..5].iter().zip(&eds[..5]).map(|(a, e)| a.cos() * e).sum();
        let den: f64 = angles[..5].iter().map(|a| a.cos()).sum();
        assert!((e.ed - num / den).abs() < 1e-12);
    }

    #[test]
    fn cold_start_errors() {
        let t = table(&[("a", vec![1.0, 0.0])]);
        assert!(cold_start_elasticity(&"new".into(), &t, &[known("a", -1.0)], 5, day(1)).is_err());
        let t = table(&[("new", vec![1.0, 0.0])]);
        assert!(cold_start_elasticity(&"new".into(), &t, &[], 5, day(1)).is_err());
    }

    #[test]
    fn projection_examples() {
        let d = project_demand(Money::from_rupees(1400), 7.0, -4.0, Money::from_rupees(1200));
        assert_eq!(d, 11.0);
        let d = project_demand(Money::from_rupees(1400), 7.0, -4.0, Money::from_rupees(1400));
        assert_eq!(d, 7.0);
        let d = project_demand(Money::from_rupees(100), 2.0, -5.0, Money::from_rupees(200));
        assert_eq!(d, 0.0);
    }

    #[test]
    fn ladder_examples() {
        let l = build_price_ladder(&catalog_entry(2000, 30.0), 7.0, -4.0, 5.0).unwrap();
        let discounts: Vec<f64> = l.entries.iter().map(|e| e.discount_pct).collect();
        let prices: Vec<Money> = l.entries.iter().map(|e| e.price).collect();
        let demands: Vec<f64> = l.entries.iter().map(|e| e.projected_demand).collect();
        assert_eq!(discounts, [25.0, 30.0, 35.0]);
        assert_eq!(prices, [1500, 1400, 1300].map(Money::from_rupees));
        assert_eq!(demands, [5.0, 7.0, 9.0]);

        let l = build_price_ladder(&catalog_entry(2000, 30.0), 7.0, 0.0, 5.0).unwrap();
        assert!(l.entries.iter().all(|e| e.projected_demand == 7.0));
    }

    #[test]
    fn ladder_clamps_and_keeps_three_slots() {
        let l = build_price_ladder(&catalog_entry(1000, 2.0), 4.0, -1.0, 5.0).unwrap();
        assert_eq!(l.entries[0].discount_pct, 0.0);
        assert_eq!(l.entries.len(), 3);
        let l = build_price_ladder(&catalog_entry(1000, 88.0), 4.0, -1.0, 5.0).unwrap();
        assert_eq!(l.entries[2].discount_pct, 90.0);
        assert!(build_price_ladder(&catalog_entry(1000, 30.0), 4.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn elasticity_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let rows = vec![known("a", -1.25), known("b", 0.5)];
        write_elasticities(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("product_id,ed,method,n_points,updated_on\n"));
        assert_eq!(read_elasticities(&path).unwrap(), rows);
    }

    proptest! {
        #[test]
        fn ladder_sign_coherence(
            mrp in 200i64..10_000,
            base in 5.0f64..80.0,
            delta in 1u32..10,
            demand in 0.0f64..500.0,
            ed in -5.0f64..5.0,
        ) {
            let l = build_price_ladder(&catalog_entry(mrp, base), demand, ed, f64::from(delta)).unwrap();
            // entries ordered by increasing discount, i.e. decreasing price
            prop_assert!(l.entries[0].price >= l.entries[1].price);
            prop_assert!(l.entries[1].price >= l.entries[2].price);
            prop_assert_eq!(l.base().projected_demand, demand);
            prop_assert!(l.entries.iter().all(|e| e.projected_demand >= 0.0));
            let d: Vec<f64> = l.entries.iter().map(|e| e.projected_demand).collect();
            if ed < 0.0 {
                prop_assert!(d[0] <= d[1] && d[1] <= d[2]);
            } else if ed > 0.0 {
                prop_assert!(d[0] >= d[1] && d[1] >= d[2]);
            }
        }

        #[test]
        fn projection_identity(p in 1i64..1_000_000, d in 0.0f64..1e4, ed in -5.0f64..5.0) {
            let price = Money::from_paise(p);
            prop_assert_eq!(project_demand(price, d, ed, price), d);
        }

        #[test]
        fn regression_recovers_exponent(exp in -4.0f64..-0.2, c in 1e5f64..1e7) {
            // real-valued power law through the level means
            let prices = [500.0f64, 600.0, 700.0, 800.0, 900.0, 1000.0];
            let pts: Vec<(f64, f64)> = prices.iter().map(|p| (p.ln(), (c * p.powf(exp)).ln())).collect();
            prop_assert!((ols_slope(&pts) - exp).abs() < 1e-6);
        }
    }
}
