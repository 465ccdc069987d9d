//! Pipeline configuration, read from TOML. Precedence is flags, then the
//! environment, then the config file, then defaults.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::ValueEnum;
use pricewise_core::features::embedding::EmbeddingConfig;
use pricewise_core::{CatalogEntry, Money};
use pricewise_demand::{
    ArimaOrder, ElasticNetParams, EnsembleParams, ForestParams, GbtParams, LstmParams, MlpParams, ModelKind,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Environment variable that overrides the configured run directory.
pub const RUN_DIR_ENV: &str = "PRICEWISE_RUN_DIR";

/// Catalog attribute that splits products into independently optimized groups.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PartitionKey {
    #[default]
    ArticleType,
    Brand,
    Gender,
    /// One partition holding the whole catalog.
    None,
}

impl PartitionKey {
    pub fn of(self, entry: &CatalogEntry) -> String {
        match self {
            PartitionKey::ArticleType => entry.article_type.clone(),
            PartitionKey::Brand => entry.brand.clone(),
            PartitionKey::Gender => entry.gender.to_string(),
            PartitionKey::None => "all".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandConfig {
    pub model: ModelKind,
    /// Number of most recent history days used as training targets. The
    /// last of them is held out for evaluation before the final refit.
    pub train_days: usize,
    pub linear: ElasticNetParams,
    pub forest: ForestParams,
    pub gbt: GbtParams,
    pub mlp: MlpParams,
    pub lstm: LstmParams,
    /// Select the ARIMA order per product instead of using `arima_order`.
    pub arima_auto: bool,
    pub arima_order: ArimaOrder,
}

impl Default for DemandConfig {
    fn default() -> Self {
        DemandConfig {
            model: ModelKind::Ensemble,
            train_days: 14,
            linear: ElasticNetParams::default(),
            forest: ForestParams::default(),
            gbt: GbtParams::default(),
            mlp: MlpParams::default(),
            lstm: LstmParams::default(),
            arima_auto: false,
            arima_order: ArimaOrder::DEFAULT,
        }
    }
}

impl DemandConfig {
    pub fn ensemble(&self) -> EnsembleParams {
        EnsembleParams {
            linear: self.linear.clone(),
            forest: self.forest.clone(),
            gbt: self.gbt.clone(),
            mlp: self.mlp.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data_dir: PathBuf,
    pub run_dir: PathBuf,
    /// Forecast day; inferred as the day after the last price-history row.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub as_of: Option<NaiveDate>,
    /// Ladder half-width in discount percentage points.
    pub delta_pct: u32,
    pub sweep_steps: usize,
    /// Solve each partition at this price budget instead of sweeping.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_c: Option<Money>,
    pub partition_key: PartitionKey,
    pub max_reject_fraction: f64,
    /// Neighbours consulted for cold-start elasticity.
    pub cold_start_k: usize,
    pub embedding: EmbeddingConfig,
    pub demand: DemandConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data_dir: PathBuf::from("data"),
            run_dir: PathBuf::from("run"),
            as_of: None,
            delta_pct: 5,
            sweep_steps: 101,
            fixed_c: None,
            partition_key: PartitionKey::ArticleType,
            max_reject_fraction: 0.01,
            cold_start_k: 5,
            embedding: EmbeddingConfig::default(),
            demand: DemandConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: PipelineConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()).map_err(|e| CliError::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.delta_pct == 0 {
            return fail("delta_pct must be a positive integer".into());
        }
        if self.sweep_steps < 2 {
            return fail(format!(
                "sweep_steps must be at least 2, got {}",
                self.sweep_steps
            ));
        }
        if self.fixed_c.is_some_and(|c| !c.is_positive()) {
            return fail("fixed_c must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.max_reject_fraction) {
            return fail(format!(
                "max_reject_fraction must lie in [0, 1], got {}",
                self.max_reject_fraction
            ));
        }
        if self.cold_start_k == 0 {
            return fail("cold_start_k must be positive".into());
        }
        if self.embedding.dimension == 0 || self.embedding.epochs == 0 {
            return fail("embedding dimension and epochs must be positive".into());
        }
        if self.demand.train_days < 2 {
            return fail(format!(
                "train_days must be at least 2 (one fit day and one holdout day), got {}",
                self.demand.train_days
            ));
        }
        Ok(())
    }

    /// Every seed that influences the run, by component.
    pub fn seeds(&self) -> Vec<(&'static str, u64)> {
        vec![
            ("embedding", self.embedding.seed),
            ("forest", self.demand.forest.seed),
            ("mlp", self.demand.mlp.seed),
            ("lstm", self.demand.lstm.seed),
        ]
    }

    /// Sets every component seed at once.
    pub fn set_seed(&mut self, seed: u64) {
        self.embedding.seed = seed;
        self.demand.forest.seed = seed;
        self.demand.mlp.seed = seed;
        self.demand.lstm.seed = seed;
    }

    /// SHA-256 of the settings that affect outputs. Directory locations are
    /// excluded; the input files are hashed separately.
    pub fn content_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.data_dir = PathBuf::new();
        canonical.run_dir = PathBuf::new();
        hex_digest(canonical.to_toml().as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn customized() -> PipelineConfig {
        let mut c = PipelineConfig {
            as_of: NaiveDate::from_ymd_opt(2024, 3, 31),
            delta_pct: 7,
            sweep_steps: 11,
            fixed_c: Some(Money::from_paise(12_345_678)),
            partition_key: PartitionKey::Brand,
            ..PipelineConfig::default()
        };
        c.demand.model = ModelKind::Gbt;
        c.demand.forest.tree.max_depth = Some(6);
        c.demand.linear.l1_weight = 0.1 + 0.2;
        c.demand.arima_order = ArimaOrder::new(2, 1, 0);
        c.set_seed(42);
        c
    }

    #[test]
    fn toml_round_trip() {
        for config in [PipelineConfig::default(), customized()] {
            let text = config.to_toml();
            assert_eq!(PipelineConfig::from_toml(&text).unwrap(), config, "{text}");
        }
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = PipelineConfig::from_toml(
            "delta_pct = 3\n[demand]\nmodel = \"mlp\"\n[demand.mlp]\nmax_epochs = 9\n",
        )
        .unwrap();
        assert_eq!(c.delta_pct, 3);
        assert_eq!(c.demand.model, ModelKind::Mlp);
        assert_eq!(c.demand.mlp.max_epochs, 9);
        assert_eq!(c.demand.mlp.hidden, MlpParams::default().hidden);
        assert_eq!(c.sweep_steps, 101);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml("delta = 3\n").is_err());
    }

    #[test]
    fn validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        let bad = [
            PipelineConfig {
                delta_pct: 0,
                ..PipelineConfig::default()
            },
            PipelineConfig {
                sweep_steps: 1,
                ..PipelineConfig::default()
            },
            PipelineConfig {
                fixed_c: Some(Money::ZERO),
                ..PipelineConfig::default()
            },
            PipelineConfig {
                cold_start_k: 0,
                ..PipelineConfig::default()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(CliError::Config(_))));
        }
        let mut short = PipelineConfig::default();
        short.demand.train_days = 1;
        assert!(short.validate().is_err());
    }

    #[test]
    fn hash_ignores_locations_only() {
        let a = PipelineConfig::default();
        let moved = PipelineConfig {
            run_dir: "elsewhere".into(),
            data_dir: "other".into(),
            ..a.clone()
        };
        assert_eq!(a.content_hash(), moved.content_hash());
        let mut changed = a.clone();
        changed.demand.gbt.n_rounds += 1;
        assert_ne!(a.content_hash(), changed.content_hash());
    }
}
