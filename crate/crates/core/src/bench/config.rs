use std::path::{Path, PathBuf};

use serde::de::{DeserializeOwned, Deserializer};
use serde::{Deserialize, Serialize};

use super::scenario::{build_block_world, default_trajectory, Trajectory};
use crate::error::{Error, Result};
use crate::likelihood::SemanticParams;
use crate::sensing::SensorConfig;
use crate::world::{load_map, WorldMap};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapSource {
    #[default]
    Builtin,
    File(PathBuf),
}

impl MapSource {
    pub fn load(&self) -> Result<WorldMap> {
        match self {
            MapSource::Builtin => Ok(build_block_world()),
            MapSource::File(path) => load_map(path),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Semantic,
    Geometric,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Semantic => "semantic",
            ModelKind::Geometric => "geometric",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Initial particle distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitMode {
    /// Uniform over the free space (global localization).
    Uniform,
    /// Gaussian around the true start pose.
    Gaussian { sigma_xy: f64, sigma_heading: f64 },
    /// Every particle exactly at the true start pose.
    TruePose,
}

impl Default for InitMode {
    /// A dive-point fix: roughly 3 m and 0.3 rad of uncertainty.
    fn default() -> Self {
        InitMode::Gaussian {
            sigma_xy: 3.0,
            sigma_heading: 0.3,
        }
    }
}

/// Sensor settings for each model kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSuite {
    #[serde(deserialize_with = "geometric_sensor")]
    pub geometric: SensorConfig,
    pub semantic: SensorConfig,
}

impl Default for SensorSuite {
    fn default() -> Self {
        SensorSuite {
            geometric: SensorConfig::geometric(),
            semantic: SensorConfig::semantic(),
        }
    }
}

/// Missing geometric sensor fields fall back to the geometric defaults
/// rather than the semantic ones.
fn geometric_sensor<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<SensorConfig, D::Error> {
    merge_over(SensorConfig::geometric(), d)
}

fn merge_over<'de, T, D>(base: T, d: D) -> std::result::Result<T, D::Error>
where
    T: Serialize + DeserializeOwned,
    D: Deserializer<'de>,
{
    use serde::de::Error as _;
    let patch = serde_json::Value::deserialize(d)?;
    let mut merged = serde_json::to_value(base).map_err(D::Error::custom)?;
    match (&mut merged, patch) {
        (serde_json::Value::Object(dst), serde_json::Value::Object(src)) => {
            for (k, v) in src {
                if !dst.contains_key(&k) {
                    return Err(D::Error::unknown_field(&k, &[]));
                }
                dst.insert(k, v);
            }
        }
        _ => return Err(D::Error::custom("expected an object")),
    }
    serde_json::from_value(merged).map_err(D::Error::custom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LikelihoodConfig {
    pub semantic: SemanticParams,
    /// Range kernel width of the geometric model, meters.
    pub sigma_range: f64,
}

impl Default for LikelihoodConfig {
    fn default() -> Self {
        LikelihoodConfig {
            semantic: SemanticParams::default(),
            sigma_range: 0.3,
        }
    }
}

/// Everything needed to reproduce one trial. Missing fields in a config
/// file take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub map: MapSource,
    pub model: ModelKind,
    pub particles: usize,
    /// Must equal the trajectory length.
    pub steps: usize,
    /// `None` selects the default loop for the map.
    pub trajectory: Option<Trajectory>,
    pub init: InitMode,
    pub sensor: SensorSuite,
    pub likelihood: LikelihoodConfig,
    pub resample_threshold: f64,
    /// Position variance (m²) below which the filter counts as converged.
    pub convergence_threshold: f64,
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            map: MapSource::Builtin,
            model: ModelKind::Semantic,
            particles: 1000,
            steps: 120,
            trajectory: None,
            init: InitMode::default(),
            sensor: SensorSuite::default(),
            likelihood: LikelihoodConfig::default(),
            resample_threshold: 0.5,
            convergence_threshold: 0.5,
            seed: 1,
        }
    }
}

impl TrialConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema {
            field: "config".into(),
            detail: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn sensor_for_model(&self) -> &SensorConfig {
        match self.model {
            ModelKind::Semantic => &self.sensor.semantic,
            ModelKind::Geometric => &self.sensor.geometric,
        }
    }

    /// Loads the map, resolves the trajectory and checks every invariant.
    pub fn resolve(&self) -> Result<(WorldMap, Trajectory)> {
        let map = self.map.load()?;
        let trajectory = match &self.trajectory {
            Some(t) => {
                t.check_clearance(&map)?;
                t.clone()
            }
            None => default_trajectory(&map)?,
        };
        self.validate(&trajectory)?;
        Ok((map, trajectory))
    }

    pub fn validate(&self, trajectory: &Trajectory) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.particles == 0 {
            return bad("particle count must be at least 1".into());
        }
        if self.steps != trajectory.commands.len() {
            return bad(format!(
                "steps ({}) must equal the trajectory length ({})",
                self.steps,
                trajectory.commands.len()
            ));
        }
        for cmd in &trajectory.commands {
            cmd.validate()?;
        }
        if !(0.0..=1.0).contains(&self.resample_threshold) {
            return bad(format!(
                "resample_threshold must lie in [0, 1], got {}",
                self.resample_threshold
            ));
        }
        if !(self.convergence_threshold > 0.0) {
            return bad(format!(
                "convergence_threshold must be positive, got {}",
                self.convergence_threshold
            ));
        }
        if let InitMode::Gaussian { sigma_xy, sigma_heading } = self.init {
            if !(sigma_xy >= 0.0 && sigma_heading >= 0.0) {
                return bad("gaussian init spreads must be non-negative".into());
            }
        }
        self.sensor.geometric.validate()?;
        self.sensor.semantic.validate()?;
        self.likelihood.semantic.validate()?;
        if !(self.likelihood.sigma_range > 0.0) {
            return bad(format!(
                "likelihood sigma_range must be positive, got {}",
                self.likelihood.sigma_range
            ));
        }
        Ok(())
    }
}
