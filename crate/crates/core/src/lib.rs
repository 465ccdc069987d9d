//! Daily price optimization for a large fashion catalog.
//!
//! The crate carries everything except the demand-model zoo:
//!
//! * [`money`] and [`types`]: paise-exact currency and the canonical record types.
//! * [`ingest`]: CSV loading, hour-to-day aggregation and validation.
//! * [`features`]: observed, engineered, sort-rank and embedding feature families.
//! * [`elasticity`]: per-product price elasticity and the three-point price ladder.
//! * [`optimizer`]: the assignment LP, a bounded-variable simplex, rounding and budget sweep.
//! * [`simulate`]: synthetic markets and A/B experiments against ground truth.

pub mod elasticity;
pub mod error;
pub mod features;
pub mod ingest;
pub mod money;
pub mod optimizer;
pub mod simulate;
pub mod types;

pub use error::{Error, Result};
pub use money::{discount_to_price, price_to_discount, Money};
pub use types::{
    CatalogEntry, ClickstreamEvent, DemandObservation, EventType, Gender, ProductId, SortRankRecord,
};
