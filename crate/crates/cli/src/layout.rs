//! File names inside a run directory.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

#[derive(Clone, Debug)]
pub struct RunLayout {
    root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunLayout { root: root.into() }
    }

    /// Creates the directory tree.
    pub fn create(&self) -> Result<()> {
        for dir in [self.root.clone(), self.models_dir(), self.sweep_dir()] {
            fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        }
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }

    pub fn ingest_summary(&self) -> PathBuf {
        self.root.join("ingest.json")
    }

    pub fn embeddings(&self) -> PathBuf {
        self.root.join("embeddings.txt")
    }

    /// Forecast-day feature rows.
    pub fn features(&self) -> PathBuf {
        self.root.join("features.csv")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn eval(&self) -> PathBuf {
        self.root.join("eval.json")
    }

    pub fn predictions(&self) -> PathBuf {
        self.root.join("predictions.csv")
    }

    pub fn elasticities(&self) -> PathBuf {
        self.root.join("elasticities.csv")
    }

    pub fn ladders(&self) -> PathBuf {
        self.root.join("ladders.csv")
    }

    pub fn assignment(&self) -> PathBuf {
        self.root.join("assignment.csv")
    }

    pub fn sweep_dir(&self) -> PathBuf {
        self.root.join("sweep")
    }

    pub fn sweep(&self, partition: &str) -> PathBuf {
        self.sweep_dir().join(format!("{}.csv", file_stem(partition)))
    }

    pub fn plans(&self) -> PathBuf {
        self.root.join("plans.json")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn report_text(&self) -> PathBuf {
        self.root.join("report.txt")
    }

    pub fn report_json(&self) -> PathBuf {
        self.root.join("report.json")
    }
}

/// A file-name-safe rendering of a partition or product name.
pub fn file_stem(name: &str) -> String {
    let stem: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if stem.is_empty() {
        "_".to_string()
    } else {
        stem
    }
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::artifact(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_path_safe() {
        assert_eq!(file_stem("Tshirts"), "Tshirts");
        assert_eq!(file_stem("Sports Shoes/Men"), "Sports_Shoes_Men");
        assert_eq!(file_stem(""), "_");
    }
}
