//! Run configuration, read from a TOML file and overridden by flags.
//!
//! ```toml
//! [divergence]
//! bins = 70
//! epsilon = 1e-8
//! weighting = "explained-variance"   # or "uniform"
//! mode = "scaled"                    # or "raw"
//! basis = "global"                   # or "pair"
//!
//! [analysis]
//! min_group_size = 100
//! degeneracy_threshold = 1e-12
//! exclude_degenerate = true
//!
//! [phenotype]
//! distinct_ratio = 0.01
//!
//! [report]
//! axes = ["task", "data_type", "depth_decile"]
//! kde_points = 256
//! ```

use std::path::Path;

use filterscope_core::analytics::PhenotypeThresholds;
use filterscope_core::analytics::AnalysisOptions;
use filterscope_core::catalog::GroupAxis;
use filterscope_core::density::DEFAULT_KDE_POINTS;
use filterscope_core::divergence::DivergenceConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {message}")]
    Read { path: String, message: String },
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Axes that get a shift matrix, ridge data and per-group bases.
    pub axes: Vec<String>,
    pub kde_points: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            axes: vec!["task".into(), "data_type".into(), "depth_decile".into()],
            kde_points: DEFAULT_KDE_POINTS,
        }
    }
}

impl ReportConfig {
    pub fn parsed_axes(&self) -> Result<Vec<GroupAxis>, ConfigError> {
        self.axes
            .iter()
            .map(|a| a.parse::<GroupAxis>().map_err(|e| ConfigError::Invalid(e.to_string())))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub divergence: DivergenceConfig,
    pub analysis: AnalysisOptions,
    pub phenotype: PhenotypeThresholds,
    pub report: ReportConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Config::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.divergence
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.report.kde_points < 2 {
            return Err(ConfigError::Invalid("report.kde_points must be >= 2".into()));
        }
        if !(self.analysis.degeneracy_threshold >= 0.0) {
            return Err(ConfigError::Invalid("analysis.degeneracy_threshold must be >= 0".into()));
        }
        self.report.parsed_axes()?;
        Ok(())
    }

    /// Pretty JSON snapshot written next to every report.
    pub fn snapshot_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use filterscope_core::divergence::{BasisScope, Weighting};
    use filterscope_core::preprocess::ScalingMode;

    #[test]
    fn empty_file_is_defaults() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn sections_override_defaults() {
        let c = Config::from_toml(
            "[divergence]\nbins = 32\nmode = \"raw\"\nbasis = \"pair\"\nweighting = \"uniform\"\n\
             [analysis]\nmin_group_size = 10\n[report]\naxes = [\"model_id\"]\n",
        )
        .unwrap();
        assert_eq!(c.divergence.bins, 32);
        assert_eq!(c.divergence.epsilon, 1e-8);
        assert_eq!(c.divergence.mode, ScalingMode::Raw);
        assert_eq!(c.divergence.basis, BasisScope::Pair);
        assert_eq!(c.divergence.weighting, Weighting::Uniform);
        assert_eq!(c.analysis.min_group_size, 10);
        assert!(c.analysis.exclude_degenerate);
        assert_eq!(c.report.parsed_axes().unwrap(), vec![GroupAxis::ModelId]);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::from_toml("[divergence]\nbins = 1\n").is_err());
        assert!(Config::from_toml("[report]\naxes = [\"colour\"]\n").is_err());
        assert!(Config::from_toml("[nonsense]\n").is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let c = Config::default();
        let back: Config = serde_json::from_str(&c.snapshot_json()).unwrap();
        assert_eq!(back, c);
    }
}
