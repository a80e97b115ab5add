//! Run configuration shared by the `preprocess`, `evaluate` and `stats`
//! commands, and its fingerprint.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{CvPlan, Grouping};
use crate::features::FeatureConfig;
use crate::models::{ClassifierKind, ModelConfig};
use crate::preprocess::PreprocessConfig;
use crate::stats::StatsConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub repetitions: usize,
    pub folds: usize,
    pub grouping: Grouping,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let plan = CvPlan::default();
        Self { repetitions: plan.repetitions, folds: plan.folds, grouping: plan.grouping }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset directory; relative paths resolve against the config file.
    /// The path is fingerprinted as written.
    pub dataset: PathBuf,
    /// Ratings CSV for `stats`; defaults to the dataset's `ratings.csv`.
    pub ratings: Option<PathBuf>,
    /// Not part of the fingerprint.
    pub output_dir: Option<PathBuf>,
    pub base_seed: u64,
    pub preprocess: PreprocessConfig,
    pub features: FeatureConfig,
    pub model: ModelConfig,
    pub eval: EvalConfig,
    pub stats: StatsConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("."),
            ratings: None,
            output_dir: None,
            base_seed: 42,
            preprocess: PreprocessConfig::default(),
            features: FeatureConfig::default(),
            model: ModelConfig::default(),
            eval: EvalConfig::default(),
            stats: StatsConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    /// Reads a JSON config; relative dataset and ratings paths resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        config.base_dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval.repetitions == 0 || self.eval.folds < 2 {
            return Err(Error::InvalidConfig("eval needs repetitions >= 1 and folds >= 2".into()));
        }
        if self.model.inner_folds < 2 {
            return Err(Error::InvalidConfig("model.inner_folds must be at least 2".into()));
        }
        self.model.grid.values()?;
        if !(0.0..=1.0).contains(&self.model.lda_shrinkage) {
            return Err(Error::InvalidConfig("model.lda_shrinkage must lie in [0, 1]".into()));
        }
        if !(self.stats.fdr_q > 0.0 && self.stats.fdr_q <= 1.0) {
            return Err(Error::InvalidConfig("stats.fdr_q must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.base_dir.join(&self.dataset)
    }

    /// Explicit ratings file, or the dataset's `ratings.csv`.
    pub fn ratings_path(&self) -> PathBuf {
        match &self.ratings {
            Some(r) => self.base_dir.join(r),
            None => self.dataset_dir().join(crate::io::RATINGS_FILE),
        }
    }

    /// `--seed` overrides both the CV base seed and the ICA seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self.preprocess.ica.seed = seed;
        self
    }

    pub fn plan(&self) -> CvPlan {
        CvPlan {
            repetitions: self.eval.repetitions,
            folds: self.eval.folds,
            base_seed: self.base_seed,
            grouping: self.eval.grouping,
        }
    }

    pub fn classifiers(&self) -> Vec<ClassifierKind> {
        match self.model.classifier {
            Some(k) => vec![k],
            None => ClassifierKind::ALL.to_vec(),
        }
    }

    /// SHA-256 over the canonical (key-sorted, compact) JSON of everything
    /// except `output_dir`.
    pub fn fingerprint(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
        }
        fingerprint_value(&value)
    }
}

/// Hex SHA-256 of the compact JSON rendering. `serde_json` maps keep keys
/// sorted, so equal values always hash equally.
pub fn fingerprint_value(value: &serde_json::Value) -> String {
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn fingerprint_of<T: Serialize>(value: &T) -> String {
    fingerprint_value(&serde_json::to_value(value).expect("value serializes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_ignores_output_dir_only() {
        let a = RunConfig::default();
        let b = RunConfig { output_dir: Some("elsewhere".into()), ..RunConfig::default() };
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = RunConfig::default().with_seed(7);
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    #[test]
    fn unknown_classifier_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"model": {"classifier": "knn"}}"#).unwrap();
        let err = RunConfig::load(&path).unwrap_err().to_string();
        assert!(err.contains("lda") && err.contains("lsvm") && err.contains("rsvm"), "{err}");
    }

    #[test]
    fn relative_dataset_follows_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"dataset": "data"}"#).unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.dataset_dir(), dir.path().join("data"));
        assert_eq!(c.ratings_path(), dir.path().join("data").join("ratings.csv"));
        // the fingerprint does not depend on where the config lives
        assert_eq!(c.fingerprint(), RunConfig { dataset: "data".into(), ..RunConfig::default() }.fingerprint());
    }
}
