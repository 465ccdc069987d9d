//! Canonical record types shared by every stage.

use std::fmt;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::money::{discount_to_price, Money};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProductId(pub String);

impl ProductId {
    pub fn new(id: impl Into<String>) -> Self {
        ProductId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ProductId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ProductId {
    fn from(s: &str) -> Self {
        ProductId(s.to_owned())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Men,
    Women,
    Unisex,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Men => "men",
            Gender::Women => "women",
            Gender::Unisex => "unisex",
        })
    }
}

/// Static product attributes from the catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub product_id: ProductId,
    pub brand: String,
    pub article_type: String,
    pub gender: Gender,
    pub mrp: Money,
    pub buying_cost: Money,
    pub base_discount_pct: f64,
    pub color: String,
}

impl CatalogEntry {
    /// Selling price at the base discount.
    pub fn base_price(&self) -> crate::Result<Money> {
        discount_to_price(self.mrp, self.base_discount_pct)
    }

    /// The (brand, article type, gender) group used for substitution features.
    pub fn bag_key(&self) -> (&str, &str, Gender) {
        (&self.brand, &self.article_type, self.gender)
    }
}

/// One product-day of sales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandObservation {
    pub product_id: ProductId,
    pub date: NaiveDate,
    pub price: Money,
    pub discount_pct: f64,
    pub quantity_sold: u32,
    pub inventory: u32,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    List,
    Pdp,
    Click,
    Cart,
    Order,
}

impl EventType {
    pub const ALL: [EventType; 5] = [
        EventType::List,
        EventType::Pdp,
        EventType::Click,
        EventType::Cart,
        EventType::Order,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Implicit interaction score used to weight embedding updates.
    /// Listing impressions are not interactions.
    pub fn implicit_score(self) -> f64 {
        match self {
            EventType::List => 0.0,
            EventType::Pdp | EventType::Click => 1.0,
            EventType::Cart => 3.0,
            EventType::Order => 5.0,
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventType::List => "list",
            EventType::Pdp => "pdp",
            EventType::Click => "click",
            EventType::Cart => "cart",
            EventType::Order => "order",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClickstreamEvent {
    pub user_id: String,
    pub product_id: ProductId,
    pub event_type: EventType,
    pub timestamp: NaiveDateTime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SortRankRecord {
    pub product_id: ProductId,
    pub rank: u32,
    pub score: f64,
}
