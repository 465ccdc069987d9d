//! Synthetic markets with known ground truth, and A/B experiments on them.
//!
//! A market is an ordinary [`Dataset`] plus, per product, the true elasticity
//! and expected daily demand at the base price. Demand at any other price is
//! the linear projection through the true elasticity; realized sales are
//! Poisson around it, truncated at the day's inventory.

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate, NaiveTime};
use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::elasticity::{project_demand, PriceLadder};
use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::money::{discount_to_price, price_to_discount, Money};
use crate::optimizer::PriceAssignment;
use crate::types::{
    CatalogEntry, ClickstreamEvent, DemandObservation, EventType, Gender, ProductId, SortRankRecord,
};

const ARTICLE_TYPES: [(&str, Gender); 10] = [
    ("tshirts", Gender::Men),
    ("shirts", Gender::Men),
    ("jeans", Gender::Unisex),
    ("dresses", Gender::Women),
    ("kurtas", Gender::Women),
    ("tops", Gender::Women),
    ("casual_shoes", Gender::Unisex),
    ("sports_shoes", Gender::Unisex),
    ("watches", Gender::Unisex),
    ("handbags", Gender::Women),
];
const BRANDS: [&str; 12] = [
    "roadster",
    "hrx",
    "here_now",
    "mast_harbour",
    "dressberry",
    "anouk",
    "sangria",
    "wrogn",
    "highlander",
    "kook_n_keech",
    "moda_rapido",
    "harvard",
];
const COLORS: [&str; 8] = ["black", "white", "navy", "red", "green", "grey", "olive", "pink"];
/// Discount offsets (percentage points) applied during promotional runs.
const PROMO_OFFSETS: [f64; 5] = [-10.0, -5.0, 0.0, 5.0, 10.0];
/// list, pdp, click, cart, order
const EVENT_MIX: [f64; 5] = [0.50, 0.25, 0.15, 0.07, 0.03];

/// Mixture the true elasticities are drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticityMix {
    /// Weight of the inelastic core, a normal truncated to `[-1, 1]`.
    pub core_weight: f64,
    pub core_mean: f64,
    pub core_sd: f64,
    /// Weight of the uniform elastic tail on `[-5, -1]`.
    pub elastic_weight: f64,
    /// The rest is uniform on `[1, 5]` (demand rises with price).
    pub giffen_weight: f64,
}

impl Default for ElasticityMix {
    fn default() -> Self {
        ElasticityMix {
            core_weight: 0.70,
            core_mean: -0.2,
            core_sd: 0.4,
            elastic_weight: 0.25,
            giffen_weight: 0.05,
        }
    }
}

impl ElasticityMix {
    fn validate(&self) -> Result<()> {
        let weights = [self.core_weight, self.elastic_weight, self.giffen_weight];
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| w.is_nan() || *w < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "elasticity mix weights {weights:?} must sum to 1"
            )));
        }
        if self.core_sd.is_nan() || self.core_sd <= 0.0 || !(-1.0..=1.0).contains(&self.core_mean) {
            return Err(Error::domain("elasticity core needs sd > 0 and mean in [-1, 1]"));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.random();
        if u < self.core_weight {
            let core = Normal::new(self.core_mean, self.core_sd).expect("validated sd");
            loop {
                let v = core.sample(rng);
                if (-1.0..=1.0).contains(&v) {
                    return v;
                }
            }
        } else if u < self.core_weight + self.elastic_weight {
            rng.random_range(-5.0..-1.0)
        } else {
            rng.random_range(1.0..5.0)
        }
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandNoise {
    /// Realized quantity is the expected demand rounded to a count.
    None,
    #[default]
    Poisson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub n_products: usize,
    /// `(fraction of products, fraction of quantity they carry)`.
    pub pareto_share: (f64, f64),
    pub elasticity_mix: ElasticityMix,
    pub noise: DemandNoise,
    pub seed: u64,
    pub history_days: u64,
    /// Median expected daily demand at the base price.
    pub median_daily_demand: f64,
    /// Fraction of products whose discount changes during the history.
    pub promo_fraction: f64,
    pub clickstream_days: u64,
    /// Defaults to twice the product count.
    pub n_users: Option<usize>,
    pub start: NaiveDate,
}

impl Default for MarketSpec {
    fn default() -> Self {
        MarketSpec {
            n_products: 1000,
            pareto_share: (0.2, 0.8),
            elasticity_mix: ElasticityMix::default(),
            noise: DemandNoise::Poisson,
            seed: 0,
            history_days: 90,
            median_daily_demand: 20.0,
            promo_fraction: 0.85,
            clickstream_days: 14,
            n_users: None,
            start: NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
        }
    }
}

impl MarketSpec {
    pub fn new(n_products: usize, seed: u64) -> Self {
        MarketSpec {
            n_products,
            seed,
            ..MarketSpec::default()
        }
    }

    /// Log-scale spread of base demand that puts `share` of the quantity on
    /// the top `fraction` of products.
    pub fn demand_sigma(&self) -> Result<f64> {
        let (fraction, share) = self.pareto_share;
        if !(fraction > 0.0 && fraction < 1.0 && share > 0.0 && share < 1.0) {
            return Err(Error::domain(format!(
                "pareto share {:?} must lie in (0, 1)",
                self.pareto_share
            )));
        }
        if share < fraction {
            return Err(Error::domain(format!(
                "top {fraction} of products cannot carry only {share} of quantity"
            )));
        }
        let std = StdNormal::standard();
        Ok(std.inverse_cdf(share) + std.inverse_cdf(1.0 - fraction))
    }
}

/// Ground truth for one product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductTruth {
    pub product_id: ProductId,
    pub elasticity: f64,
    /// Expected daily demand at the base price with full traffic.
    pub base_demand: f64,
    /// Units available per day.
    pub inventory: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Market {
    pub dataset: Dataset,
    /// Aligned with `dataset.catalog`.
    pub truth: Vec<ProductTruth>,
    pub users: Vec<String>,
}

impl Market {
    pub fn truth_for(&self, id: &ProductId) -> Option<&ProductTruth> {
        self.dataset
            .catalog
            .binary_search_by(|e| e.product_id.cmp(id))
            .ok()
            .map(|i| &self.truth[i])
    }

    /// True expected full-traffic demand for product `i` at `price`.
    pub fn expected_demand(&self, i: usize, price: Money) -> Result<f64> {
        let base = self.dataset.catalog[i].base_price()?;
        let t = &self.truth[i];
        Ok(project_demand(base, t.base_demand, t.elasticity, price))
    }
}

fn sub_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn realize(expected: f64, cap: u32, noise: DemandNoise, rng: &mut impl Rng) -> u32 {
    let draw = match noise {
        DemandNoise::None => expected.round(),
        DemandNoise::Poisson if expected > 0.0 => {
            Poisson::new(expected).expect("positive finite rate").sample(rng)
        }
        DemandNoise::Poisson => 0.0,
    };
    (draw.min(f64::from(cap))) as u32
}

fn generate_catalog(spec: &MarketSpec, rng: &mut ChaCha8Rng) -> Result<Vec<CatalogEntry>> {
    let width = spec.n_products.to_string().len().max(4);
    (0..spec.n_products)
        .map(|i| {
            let (article_type, gender) = ARTICLE_TYPES[rng.random_range(0..ARTICLE_TYPES.len())];
            let mrp = Money::from_rupees(rng.random_range(3..50i64) * 100 - 1);
            let cost_ratio = rng.random_range(0.30..0.55);
            let buying_cost = Money::from_rupees((mrp.as_rupees() * cost_ratio).round() as i64);
            Ok(CatalogEntry {
                product_id: ProductId::new(format!("P{i:0width$}")),
                brand: BRANDS[rng.random_range(0..BRANDS.len())].to_owned(),
                article_type: article_type.to_owned(),
                gender,
                mrp,
                buying_cost,
                base_discount_pct: f64::from(rng.random_range(2..=10u32) * 5),
                color: COLORS[rng.random_range(0..COLORS.len())].to_owned(),
            })
        })
        .collect()
}

/// Base demands at stratified log-normal quantiles, randomly assigned.
fn generate_truth(
    spec: &MarketSpec,
    catalog: &[CatalogEntry],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ProductTruth>> {
    let sigma = spec.demand_sigma()?;
    let std = StdNormal::standard();
    let n = catalog.len();
    let mut demands: Vec<f64> = (0..n)
        .map(|k| {
            let q = (k as f64 + 0.5) / n as f64;
            spec.median_daily_demand * (sigma * std.inverse_cdf(q)).exp()
        })
        .collect();
    demands.shuffle(rng);
    Ok(catalog
        .iter()
        .zip(demands)
        .map(|(e, base_demand)| ProductTruth {
            product_id: e.product_id.clone(),
            elasticity: spec.elasticity_mix.sample(rng),
            base_demand,
            inventory: (4.0 * base_demand).ceil() as u32 + 20,
        })
        .collect())
}

/// Daily discounts: base discount, or promotional runs of 8 to 20 days.
fn discount_schedule(base: f64, days: usize, promo: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if !promo {
        return vec![base; days];
    }
    let mut out = Vec::with_capacity(days);
    let mut last = f64::NAN;
    while out.len() < days {
        let len = rng.random_range(8..=20usize);
        let mut offset = PROMO_OFFSETS[rng.random_range(0..PROMO_OFFSETS.len())];
        if offset == last {
            offset = PROMO_OFFSETS[rng.random_range(0..PROMO_OFFSETS.len())];
        }
        last = offset;
        let discount = (base + offset).clamp(0.0, 90.0);
        out.extend(std::iter::repeat_n(discount, len.min(days - out.len())));
    }
    out
}

fn generate_history(
    spec: &MarketSpec,
    catalog: &[CatalogEntry],
    truth: &[ProductTruth],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<DemandObservation>> {
    let days = spec.history_days as usize;
    let mut out = Vec::with_capacity(days * catalog.len());
    for (e, t) in catalog.iter().zip(truth) {
        let promo = rng.random::<f64>() < spec.promo_fraction;
        let base_price = e.base_price()?;
        for (d, discount) in discount_schedule(e.base_discount_pct, days, promo, rng)
            .into_iter()
            .enumerate()
        {
            let price = discount_to_price(e.mrp, discount)?;
            let expected = project_demand(base_price, t.base_demand, t.elasticity, price);
            out.push(DemandObservation {
                product_id: e.product_id.clone(),
                date: spec.start + Days::new(d as u64),
                price,
                discount_pct: discount,
                quantity_sold: realize(expected, t.inventory, spec.noise, rng),
                inventory: t.inventory,
            });
        }
    }
    Ok(out)
}

/// Browsing sessions: each user favours one article type and picks products
/// in proportion to their demand.
fn generate_clickstream(
    spec: &MarketSpec,
    catalog: &[CatalogEntry],
    truth: &[ProductTruth],
    users: &[String],
    as_of: NaiveDate,
    rng: &mut ChaCha8Rng,
) -> Vec<ClickstreamEvent> {
    let mut by_type: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in catalog.iter().enumerate() {
        by_type.entry(e.article_type.as_str()).or_default().push(i);
    }
    let groups: Vec<(Vec<usize>, WeightedIndex<f64>)> = by_type
        .into_values()
        .map(|members| {
            let w =
                WeightedIndex::new(members.iter().map(|&i| truth[i].base_demand)).expect("positive demands");
            (members, w)
        })
        .collect();
    let everyone = WeightedIndex::new(truth.iter().map(|t| t.base_demand)).expect("positive demands");
    let event_mix = WeightedIndex::new(EVENT_MIX).expect("valid mix");
    let preference: Vec<usize> = users.iter().map(|_| rng.random_range(0..groups.len())).collect();

    let mut events = Vec::new();
    let first = as_of - Days::new(spec.clickstream_days);
    for d in 0..spec.clickstream_days {
        let date = first + Days::new(d);
        for (user, &pref) in users.iter().zip(&preference) {
            if rng.random::<f64>() >= 0.3 {
                continue;
            }
            let mut second = rng.random_range(0..80_000u32);
            let length = rng.random_range(2..=8);
            for _ in 0..length {
                let product = if rng.random::<f64>() < 0.8 {
                    let (members, w) = &groups[pref];
                    members[w.sample(rng)]
                } else {
                    everyone.sample(rng)
                };
                second += rng.random_range(5..300);
                let time = NaiveTime::from_num_seconds_from_midnight_opt(second.min(86_399), 0)
                    .expect("within a day");
                events.push(ClickstreamEvent {
                    user_id: user.clone(),
                    product_id: catalog[product].product_id.clone(),
                    event_type: EventType::ALL[event_mix.sample(rng)],
                    timestamp: date.and_time(time),
                });
            }
        }
    }
    events
}

fn generate_sort_ranks(truth: &[ProductTruth], rng: &mut ChaCha8Rng) -> Vec<SortRankRecord> {
    let noise = Normal::<f64>::new(0.0, 0.3).expect("valid sd");
    let mut scored: Vec<(f64, &ProductId)> = truth
        .iter()
        .map(|t| (t.base_demand * noise.sample(rng).exp(), &t.product_id))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    scored
        .into_iter()
        .enumerate()
        .map(|(rank, (score, id))| SortRankRecord {
            product_id: id.clone(),
            rank: rank as u32 + 1,
            score,
        })
        .collect()
}

pub fn generate_market(spec: &MarketSpec) -> Result<Market> {
    if spec.n_products < 2 {
        return Err(Error::domain("a market needs at least two products"));
    }
    if spec.history_days < 8 || spec.clickstream_days > spec.history_days {
        return Err(Error::domain(
            "history must cover at least 8 days and contain the clickstream window",
        ));
    }
    if spec.median_daily_demand.is_nan()
        || spec.median_daily_demand <= 0.0
        || !(0.0..=1.0).contains(&spec.promo_fraction)
    {
        return Err(Error::domain(
            "median demand must be positive, promo fraction in [0, 1]",
        ));
    }
    spec.elasticity_mix.validate()?;
    spec.demand_sigma()?;

    let catalog = generate_catalog(spec, &mut sub_rng(spec.seed, 1))?;
    let truth = generate_truth(spec, &catalog, &mut sub_rng(spec.seed, 2))?;
    let price_history = generate_history(spec, &catalog, &truth, &mut sub_rng(spec.seed, 3))?;
    let n_users = spec.n_users.unwrap_or(2 * spec.n_products);
    let width = n_users.to_string().len().max(4);
    let users: Vec<String> = (0..n_users).map(|u| format!("U{u:0width$}")).collect();
    let as_of = spec.start + Days::new(spec.history_days);
    let clickstream = generate_clickstream(spec, &catalog, &truth, &users, as_of, &mut sub_rng(spec.seed, 4));
    let sort_ranks = generate_sort_ranks(&truth, &mut sub_rng(spec.seed, 5));

    let mut dataset = Dataset {
        catalog,
        price_history,
        clickstream,
        sort_ranks,
        as_of,
    };
    dataset.normalize();
    Ok(Market {
        dataset,
        truth,
        users,
    })
}

/// Offered price per product.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PriceSchedule(pub BTreeMap<ProductId, Money>);

impl PriceSchedule {
    /// Every catalog product at its base discount.
    pub fn baseline(dataset: &Dataset) -> Result<Self> {
        dataset
            .catalog
            .iter()
            .map(|e| Ok((e.product_id.clone(), e.base_price()?)))
            .collect::<Result<_>>()
            .map(PriceSchedule)
    }

    pub fn from_assignment(ladders: &[PriceLadder], assignment: &PriceAssignment) -> Self {
        PriceSchedule(
            ladders
                .iter()
                .zip(&assignment.choices)
                .map(|(l, &j)| (l.product_id.clone(), l.entries[j].price))
                .collect(),
        )
    }

    pub fn get(&self, id: &ProductId) -> Option<Money> {
        self.0.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(ProductId, Money)> for PriceSchedule {
    fn from_iter<I: IntoIterator<Item = (ProductId, Money)>>(iter: I) -> Self {
        PriceSchedule(iter.into_iter().collect())
    }
}

impl Extend<(ProductId, Money)> for PriceSchedule {
    fn extend<I: IntoIterator<Item = (ProductId, Money)>>(&mut self, iter: I) {
        self.0.extend(iter)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DayOutcome {
    pub observations: Vec<DemandObservation>,
    /// Expected demand per product, aligned with `observations`.
    pub expected: Vec<f64>,
}

fn offered_prices(market: &Market, prices: &PriceSchedule) -> Result<Vec<Money>> {
    market
        .dataset
        .catalog
        .iter()
        .map(|e| {
            prices
                .get(&e.product_id)
                .ok_or_else(|| Error::domain(format!("no price for product {}", e.product_id)))
        })
        .collect()
}

/// One day of sales for a `traffic` share of users, who also get that share
/// of each product's inventory.
fn simulate_share(
    market: &Market,
    offered: &[Money],
    date: NaiveDate,
    traffic: f64,
    noise: DemandNoise,
    rng: &mut impl Rng,
) -> Result<DayOutcome> {
    let n = market.truth.len();
    let mut observations = Vec::with_capacity(n);
    let mut expected = Vec::with_capacity(n);
    for (i, (entry, &price)) in market.dataset.catalog.iter().zip(offered).enumerate() {
        let mean = traffic * market.expected_demand(i, price)?;
        let cap = (traffic * f64::from(market.truth[i].inventory)).floor() as u32;
        observations.push(DemandObservation {
            product_id: entry.product_id.clone(),
            date,
            price,
            discount_pct: price_to_discount(entry.mrp, price)?,
            quantity_sold: realize(mean, cap, noise, rng),
            inventory: cap,
        });
        expected.push(mean);
    }
    Ok(DayOutcome {
        observations,
        expected,
    })
}

/// Realized demand for every product on `date` at the offered prices.
pub fn simulate_day(
    market: &Market,
    prices: &PriceSchedule,
    date: NaiveDate,
    noise: DemandNoise,
    seed: u64,
) -> Result<DayOutcome> {
    let offered = offered_prices(market, prices)?;
    simulate_share(
        market,
        &offered,
        date,
        1.0,
        noise,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
}

/// `(revenue - buying cost) / revenue`.
pub fn gross_margin(revenue: Money, buying_cost_total: Money) -> Result<f64> {
    if !revenue.is_positive() {
        return Err(Error::domain(format!(
            "gross margin needs positive revenue, got {revenue}"
        )));
    }
    Ok((revenue - buying_cost_total).paise() as f64 / revenue.paise() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbReport {
    pub revenue_a: Money,
    pub revenue_b: Money,
    pub gm_a: Option<f64>,
    pub gm_b: Option<f64>,
    pub revenue_uplift_pct: f64,
    pub gm_uplift_pct: Option<f64>,
    pub units_a: u64,
    pub units_b: u64,
    pub users_a: usize,
    pub users_b: usize,
    pub n_days: u32,
    pub split_seed: u64,
}

impl AbReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Default)]
struct ArmTotals {
    revenue: Money,
    cost: Money,
    units: u64,
}

/// Splits users evenly into a control arm shown `baseline` prices and a
/// treatment arm shown `model` prices, then runs `n_days` days from the
/// market's `as_of`. Each arm gets its share of traffic and inventory.
pub fn run_ab_test(
    market: &Market,
    baseline: &PriceSchedule,
    model: &PriceSchedule,
    n_days: u32,
    split_seed: u64,
) -> Result<AbReport> {
    if n_days < 1 {
        return Err(Error::domain("an A/B test needs at least one day"));
    }
    let offered = [offered_prices(market, baseline)?, offered_prices(market, model)?];

    let mut users: Vec<&String> = market.users.iter().collect();
    users.shuffle(&mut sub_rng(split_seed, 0));
    let users_a = users.len() / 2;
    let users_b = users.len() - users_a;
    let shares = if users.is_empty() {
        [0.5, 0.5]
    } else {
        [users_a, users_b].map(|u| u as f64 / users.len() as f64)
    };

    let mut totals = [ArmTotals::default(), ArmTotals::default()];
    for (arm, total) in totals.iter_mut().enumerate() {
        let mut rng = sub_rng(split_seed, 1 + arm as u64);
        for d in 0..n_days {
            let date = market.dataset.as_of + Days::new(u64::from(d));
            let day = simulate_share(
                market,
                &offered[arm],
                date,
                shares[arm],
                DemandNoise::Poisson,
                &mut rng,
            )?;
            for (o, e) in day.observations.iter().zip(&market.dataset.catalog) {
                let q = i64::from(o.quantity_sold);
                total.revenue += o.price * q;
                total.cost += e.buying_cost * q;
                total.units += o.quantity_sold as u64;
            }
        }
    }
    let [a, b] = totals;
    if !a.revenue.is_positive() {
        return Err(Error::domain("control arm has no revenue"));
    }
    let gm_a = gross_margin(a.revenue, a.cost).ok();
    let gm_b = gross_margin(b.revenue, b.cost).ok();
    let uplift = |a: f64, b: f64| 100.0 * (b - a) / a;
    Ok(AbReport {
        revenue_a: a.revenue,
        revenue_b: b.revenue,
        revenue_uplift_pct: uplift(a.revenue.paise() as f64, b.revenue.paise() as f64),
        gm_uplift_pct: match (gm_a, gm_b) {
            (Some(ga), Some(gb)) if ga != 0.0 => Some(uplift(ga, gb)),
            _ => None,
        },
        gm_a,
        gm_b,
        units_a: a.units,
        units_b: b.units,
        users_a,
        users_b,
        n_days,
        split_seed,
    })
}
