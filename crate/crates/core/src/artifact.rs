//! Run manifests and weight files.
//!
//! Weight files are JSON. Floats are written in shortest round-trip form,
//! so load followed by save reproduces the file byte for byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adp::ActionSet;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::features::{Architecture, FeatureMap, Grid, WeightVector};
use crate::pareto::{Family, Trained};

pub const WEIGHTS_FORMAT: u32 = 1;

/// Provenance of a set of outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub config: RunConfig,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<PathBuf>,
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn start(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            seed: config.solver.seed,
            started_unix: unix_now(),
            finished_unix: 0,
            outputs: Vec::new(),
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix = unix_now();
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

/// Shape of the feature vector the weights belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub feature_count: usize,
    pub intruder_grid: Grid,
    pub goal_grid: Grid,
}

impl FeatureLayout {
    pub fn of(map: &FeatureMap) -> Self {
        Self {
            feature_count: map.len(),
            intruder_grid: map.intruder_grid.clone(),
            goal_grid: map.goal_grid.clone(),
        }
    }
}

/// Trained weights with everything needed to use them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub format: u32,
    pub family: Family,
    pub lambda: f64,
    pub action_set: ActionSet,
    pub layout: FeatureLayout,
    pub theta: WeightVector,
    /// Post-decision weights; absent until extraction has run.
    pub theta_q: Option<WeightVector>,
    pub manifest: RunManifest,
}

impl WeightsFile {
    pub fn from_trained(family: Family, trained: &Trained, manifest: RunManifest) -> Self {
        Self {
            format: WEIGHTS_FORMAT,
            family,
            lambda: trained.model.scenario.lambda,
            action_set: trained.solver.action_set.clone(),
            layout: FeatureLayout::of(&trained.model.features),
            theta: trained.theta.clone(),
            theta_q: Some(trained.theta_q.clone()),
            manifest,
        }
    }

    /// Fails unless the weights fit the feature map of `map`.
    pub fn check_compatible(&self, map: &FeatureMap) -> Result<()> {
        if self.format != WEIGHTS_FORMAT {
            return Err(Error::Incompatible(format!(
                "weights format {} is not supported (expected {WEIGHTS_FORMAT})",
                self.format
            )));
        }
        let here = FeatureLayout::of(map);
        if self.layout != here {
            return Err(Error::Incompatible(format!(
                "feature layout differs: file has {} features, configuration has {}{}",
                self.layout.feature_count,
                here.feature_count,
                if self.layout.feature_count == here.feature_count { " with different grid nodes" } else { "" }
            )));
        }
        let bad = |w: &WeightVector| w.len() != here.feature_count;
        if bad(&self.theta) || self.theta_q.as_ref().is_some_and(bad) {
            return Err(Error::Incompatible("weight vector length does not match the layout".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// Load and check against the feature map in use.
    pub fn load_for(path: &Path, map: &FeatureMap) -> Result<Self> {
        let w = Self::load(path)?;
        w.check_compatible(map)?;
        Ok(w)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact {
            path: path.to_path_buf(),
            hint: "file does not exist".into(),
        },
        _ => Error::Io(e),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
