//! Localization space and model parameters.
//!
//! A [`RegionMap`] lists the candidate regions a nanodevice can traverse on
//! each lap (heart → region → heart), with the lap's travel time and the
//! probability of choosing that region. [`ModelParams`] carries detection,
//! transmission, noise and truncation settings. Both load from and save to
//! versioned JSON documents.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Current version of the region-map and scenario JSON documents.
pub const SCHEMA_VERSION: u32 = 1;

/// Allowed deviation of the traversal probabilities from a unit sum.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("validation error: {0}")]
    Validation(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: u32,
    pub name: String,
    #[serde(rename = "travel_time_s")]
    pub travel_time: f64,
    pub traversal_prob: f64,
}

impl Region {
    pub fn new(id: u32, name: impl Into<String>, travel_time: f64, traversal_prob: f64) -> Self {
        Self {
            id,
            name: name.into(),
            travel_time,
            traversal_prob,
        }
    }
}

/// The localization space.
///
/// Regions are kept in the order given; every per-region vector elsewhere in
/// the crate (lap vectors in particular) is indexed by position in this list,
/// not by region id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub schema_version: u32,
    pub regions: Vec<Region>,
    #[serde(default)]
    pub excluded_from_bit_metrics: BTreeSet<u32>,
    /// Set on maps whose travel times and probabilities are not measured
    /// values and must be calibrated before use.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub placeholder: bool,
}

impl RegionMap {
    /// Builds and validates a map.
    pub fn new(regions: Vec<Region>, excluded: impl IntoIterator<Item = u32>) -> Result<Self, ConfigError> {
        let map = Self {
            schema_version: SCHEMA_VERSION,
            regions,
            excluded_from_bit_metrics: excluded.into_iter().collect(),
            placeholder: false,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion(self.schema_version));
        }
        if self.regions.is_empty() {
            return Err(invalid("region map must contain at least 1 region"));
        }
        let mut ids = BTreeSet::new();
        for r in &self.regions {
            if r.id == 0 {
                return Err(invalid(format!("region id must be positive (region \"{}\")", r.name)));
            }
            if !ids.insert(r.id) {
                return Err(invalid(format!("duplicate region id {}", r.id)));
            }
            if !(r.travel_time.is_finite() && r.travel_time > 0.0) {
                return Err(invalid(format!(
                    "region {} travel time must be > 0, got {}",
                    r.id, r.travel_time
                )));
            }
            if !(r.traversal_prob > 0.0 && r.traversal_prob <= 1.0) {
                return Err(invalid(format!(
                    "region {} traversal probability must be in (0,1], got {}",
                    r.id, r.traversal_prob
                )));
            }
        }
        let sum: f64 = self.regions.iter().map(|r| r.traversal_prob).sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(invalid(format!("traversal probabilities sum to {sum}")));
        }
        if let Some(bad) = self.excluded_from_bit_metrics.iter().find(|id| !ids.contains(id)) {
            return Err(invalid(format!("excluded region id {bad} is not in the map")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Position of a region id in [`RegionMap::regions`].
    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.regions.iter().position(|r| r.id == id)
    }

    pub fn region(&self, id: u32) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.regions.iter().map(|r| r.id)
    }

    pub fn travel_times(&self) -> Vec<f64> {
        self.regions.iter().map(|r| r.travel_time).collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.regions.iter().map(|r| r.traversal_prob).collect()
    }

    pub fn min_travel_time(&self) -> f64 {
        self.regions.iter().map(|r| r.travel_time).fold(f64::INFINITY, f64::min)
    }

    /// Mean lap duration under the categorical region choice.
    pub fn mean_lap_time(&self) -> f64 {
        self.regions.iter().map(|r| r.travel_time * r.traversal_prob).sum()
    }

    pub fn is_excluded(&self, id: u32) -> bool {
        self.excluded_from_bit_metrics.contains(&id)
    }

    /// Stable content hash used to check that two datasets share a map.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("region map serializes");
        let digest = Sha256::digest(&canonical);
        hex::encode(&digest[..8])
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let map: RegionMap = serde_json::from_str(text)?;
        map.validate()?;
        Ok(map)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("region map serializes")
    }
}

/// Reads and validates a region-map JSON file. Probabilities are checked,
/// never renormalized.
pub fn load_region_map(path: impl AsRef<Path>) -> Result<RegionMap, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    RegionMap::from_json(&text)
}

pub fn save_region_map(map: &RegionMap, path: impl AsRef<Path>) -> Result<(), ConfigError> {
    let path = path.as_ref();
    fs::write(path, map.to_json()).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Per-pass probability of detecting the event in the event region.
    pub p_det: f64,
    /// Per-heart-passage probability of delivering a report.
    pub p_trans: f64,
    /// Standard deviation of the Gaussian noise on each reported time.
    #[serde(rename = "noise_sigma_s")]
    pub noise_sigma: f64,
    /// Total time the nanodevices spend in the bloodstream.
    #[serde(rename = "duration_s")]
    pub duration: f64,
    /// Largest number of laps enumerated in one reporting window.
    pub max_laps: u32,
    /// Enumeration subtrees whose total mass is below this are skipped.
    pub mass_epsilon: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            p_det: 0.7,
            p_trans: 0.7,
            noise_sigma: 1.0,
            duration: 3600.0,
            max_laps: 6,
            mass_epsilon: 1e-9,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.p_det) {
            return Err(invalid(format!("p_det must be in [0,1], got {}", self.p_det)));
        }
        if !(self.p_trans > 0.0 && self.p_trans <= 1.0) {
            return Err(invalid(format!("p_trans must be in (0,1], got {}", self.p_trans)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(invalid(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        if self.duration.is_nan() || self.duration <= 0.0 {
            return Err(invalid(format!("duration must be > 0, got {}", self.duration)));
        }
        if self.max_laps == 0 {
            return Err(invalid("max_laps must be a positive integer"));
        }
        if self.mass_epsilon.is_nan() || self.mass_epsilon < 0.0 {
            return Err(invalid(format!("mass_epsilon must be >= 0, got {}", self.mass_epsilon)));
        }
        Ok(())
    }
}

/// A fully specified run: map, event location, parameters, population and
/// seed. Embedded verbatim in every dataset sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub map: RegionMap,
    pub event_region: u32,
    #[serde(flatten)]
    pub params: ModelParams,
    pub device_count: u64,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.map.validate()?;
        self.params.validate()?;
        if self.map.index_of(self.event_region).is_none() {
            return Err(invalid(format!("event region {} is not in the map", self.event_region)));
        }
        if self.device_count == 0 {
            return Err(invalid("device_count must be >= 1"));
        }
        Ok(())
    }
}

/// On-disk scenario document. The region map is referenced by path,
/// resolved relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_map_path: Option<String>,
    pub event_region: u32,
    #[serde(flatten)]
    pub params: ModelParams,
    #[serde(default = "default_devices")]
    pub device_count: u64,
    #[serde(default)]
    pub seed: u64,
}

fn default_devices() -> u64 {
    1000
}

pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<ScenarioFile, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: ScenarioFile = serde_json::from_str(&text)?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(ConfigError::SchemaVersion(file.schema_version));
    }
    file.params.validate()?;
    Ok(file)
}

/// The two-region example: travel times (60, 67) s, traversal
/// probabilities (0.49, 0.51), P_det = P_trans = 0.7.
///
/// Duration (3600 s), noise (1 s) and truncation are defaults of this
/// crate, not part of the published example.
pub fn builtin_two_region_example() -> (RegionMap, ModelParams) {
    let map = RegionMap::new(
        vec![Region::new(1, "R1", 60.0, 0.49), Region::new(2, "R2", 67.0, 0.51)],
        [],
    )
    .expect("builtin example is valid");
    (map, ModelParams::default())
}

const TEMPLATE_REGIONS: [(&str, f64); 24] = [
    ("Head", 50.0),
    ("Thorax", 40.0),
    ("Right shoulder", 45.0),
    ("Left shoulder", 45.0),
    ("Spleen", 55.0),
    ("Right upper arm", 60.0),
    ("Left upper arm", 60.0),
    ("Liver", 55.0),
    ("Right elbow", 70.0),
    ("Intestine", 65.0),
    ("Right hand", 85.0),
    ("Kidneys", 60.0),
    ("Left elbow", 70.0),
    ("Left hand", 85.0),
    ("Right hip", 75.0),
    ("Left hip", 75.0),
    ("Right knee", 90.0),
    ("Left pelvis", 70.0),
    ("Left knee", 90.0),
    ("Right pelvis", 70.0),
    ("Right foot", 110.0),
    ("Left foot", 110.0),
    ("Lungs", 30.0),
    ("Right heart", 20.0),
];

/// 24-region body map (ids 1..=24). Lungs (23) and right heart (24) are
/// excluded from bit-ratio metrics.
///
/// Probabilities are uniform and travel times are synthetic integers that
/// grow with distance from the heart. Both are placeholders: the map is
/// flagged with [`RegionMap::placeholder`] until recalibrated.
pub fn builtin_24_region_template() -> RegionMap {
    let p = 1.0 / TEMPLATE_REGIONS.len() as f64;
    let regions = TEMPLATE_REGIONS
        .iter()
        .zip(1u32..)
        .map(|(&(name, t), id)| Region::new(id, name, t, p))
        .collect();
    let mut map = RegionMap::new(regions, [23, 24]).expect("template is valid");
    map.placeholder = true;
    map
}
