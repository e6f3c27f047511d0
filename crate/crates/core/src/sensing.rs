//! Observation simulators: noisy scans and detections for the true pose,
//! noiseless predictions for particle hypotheses.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{wrap_angle, ClassLabel, Point2, Pose2D, WorldMap};

/// Smallest range a noisy return is clamped to.
const MIN_RANGE: f64 = 1e-6;

/// Class label given to clutter detections.
pub const CLUTTER_LABEL: &str = "clutter";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    /// Field of view, radians.
    pub fov: f64,
    pub max_range: f64,
    /// Number of beams in a range scan.
    pub beam_count: usize,
    pub sigma_range: f64,
    pub sigma_rho: f64,
    pub sigma_theta: f64,
    pub detect_prob: f64,
    pub occlusion: bool,
    /// Mean number of false detections per semantic observation.
    pub clutter_rate: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig::semantic()
    }
}

impl SensorConfig {
    /// Full-circle 72-beam scanning sonar.
    pub fn geometric() -> Self {
        SensorConfig {
            fov: TAU,
            max_range: 20.0,
            beam_count: 72,
            sigma_range: 0.75,
            ..SensorConfig::semantic()
        }
    }

    /// Forward-looking object detector.
    pub fn semantic() -> Self {
        SensorConfig {
            fov: PI,
            max_range: 20.0,
            beam_count: 72,
            sigma_range: 0.1,
            sigma_rho: 0.2,
            sigma_theta: 0.02,
            detect_prob: 0.9,
            occlusion: false,
            clutter_rate: 0.0,
        }
    }

    /// The same sensor with every noise source and dropout disabled.
    pub fn noiseless(&self) -> Self {
        SensorConfig {
            sigma_range: 0.0,
            sigma_rho: 0.0,
            sigma_theta: 0.0,
            detect_prob: 1.0,
            clutter_rate: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.fov > 0.0 && self.fov <= TAU) {
            return bad(format!("sensor fov must lie in (0, 2π], got {}", self.fov));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return bad(format!("sensor max_range must be positive, got {}", self.max_range));
        }
        if self.beam_count == 0 {
            return bad("beam_count must be at least 1".into());
        }
        for (name, sigma) in [
            ("sigma_range", self.sigma_range),
            ("sigma_rho", self.sigma_rho),
            ("sigma_theta", self.sigma_theta),
        ] {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return bad(format!("{name} must be non-negative, got {sigma}"));
            }
        }
        if !(0.0..=1.0).contains(&self.detect_prob) {
            return bad(format!("detect_prob must lie in [0, 1], got {}", self.detect_prob));
        }
        if !(self.clutter_rate >= 0.0 && self.clutter_rate.is_finite()) {
            return bad(format!("clutter_rate must be non-negative, got {}", self.clutter_rate));
        }
        Ok(())
    }

    /// Beam bearings relative to the heading, evenly spread over the field
    /// of view. A full circle is split into `beam_count` equal sectors
    /// starting at -π so that no bearing is repeated.
    pub fn beam_bearings(&self) -> Vec<f64> {
        let n = self.beam_count;
        if self.fov >= TAU {
            let step = TAU / n as f64;
            (0..n).map(|i| -PI + i as f64 * step).collect()
        } else if n == 1 {
            vec![0.0]
        } else {
            let step = self.fov / (n - 1) as f64;
            (0..n).map(|i| -0.5 * self.fov + i as f64 * step).collect()
        }
    }
}

/// Array of ranges along fixed relative bearings. `None` marks a beam with no
/// return within `max_range`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeScan {
    pub bearings: Vec<f64>,
    pub ranges: Vec<Option<f64>>,
    pub max_range: f64,
}

impl RangeScan {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub class_label: ClassLabel,
    /// Range to the object, meters.
    pub rho: f64,
    /// Bearing relative to the heading, radians in `[-π, π)`.
    pub theta: f64,
}

impl Detection {
    pub fn new(class_label: &str, rho: f64, theta: f64) -> Self {
        Detection {
            class_label: ClassLabel::from(class_label),
            rho,
            theta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SemanticObservation {
    pub detections: Vec<Detection>,
}

impl SemanticObservation {
    pub fn new(detections: Vec<Detection>) -> Self {
        SemanticObservation { detections }
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        sigma * z
    } else {
        0.0
    }
}

fn cast_beams(map: &WorldMap, pose: &Pose2D, bearings: &[f64], max_range: f64) -> Result<Vec<Option<f64>>> {
    map.ray_cast_beams(pose, bearings, max_range)
}

/// Noisy range scan taken from `true_pose`.
pub fn simulate_range_scan<R: Rng + ?Sized>(
    map: &WorldMap,
    true_pose: &Pose2D,
    cfg: &SensorConfig,
    rng: &mut R,
) -> Result<RangeScan> {
    cfg.validate()?;
    let bearings = cfg.beam_bearings();
    let mut ranges = cast_beams(map, true_pose, &bearings, cfg.max_range)?;
    for range in ranges.iter_mut().flatten() {
        let noisy = *range + gaussian(rng, cfg.sigma_range);
        *range = noisy.clamp(MIN_RANGE, cfg.max_range);
    }
    Ok(RangeScan {
        bearings,
        ranges,
        max_range: cfg.max_range,
    })
}

/// Noiseless scan predicted for a hypothesis.
pub fn expected_range_scan(map: &WorldMap, hypothesis: &Pose2D, cfg: &SensorConfig) -> Result<RangeScan> {
    let bearings = cfg.beam_bearings();
    expected_range_scan_with(map, hypothesis, bearings, cfg.max_range)
}

/// [`expected_range_scan`] with precomputed beam bearings.
pub fn expected_range_scan_with(
    map: &WorldMap,
    hypothesis: &Pose2D,
    bearings: Vec<f64>,
    max_range: f64,
) -> Result<RangeScan> {
    let ranges = cast_beams(map, hypothesis, &bearings, max_range)?;
    Ok(RangeScan {
        bearings,
        ranges,
        max_range,
    })
}

/// Noisy object detections seen from `true_pose`. Each visible object is
/// kept with probability `detect_prob`; identities are dropped.
pub fn simulate_semantic_obs<R: Rng + ?Sized>(
    map: &WorldMap,
    true_pose: &Pose2D,
    cfg: &SensorConfig,
    rng: &mut R,
) -> Result<SemanticObservation> {
    cfg.validate()?;
    let visible = map.visible_objects(true_pose, cfg.fov, cfg.max_range, cfg.occlusion)?;
    let mut detections = Vec::with_capacity(visible.len());
    for obj in visible {
        if rng.random::<f64>() >= cfg.detect_prob {
            continue;
        }
        let rho = if cfg.sigma_rho > 0.0 {
            (obj.range + gaussian(rng, cfg.sigma_rho)).max(MIN_RANGE)
        } else {
            obj.range
        };
        let theta = if cfg.sigma_theta > 0.0 {
            wrap_angle(obj.bearing + gaussian(rng, cfg.sigma_theta))
        } else {
            obj.bearing
        };
        detections.push(Detection {
            class_label: obj.class_label,
            rho,
            theta,
        });
    }
    if cfg.clutter_rate > 0.0 {
        let count = Poisson::new(cfg.clutter_rate)
            .map_err(|e| Error::InvalidArgument(format!("clutter_rate: {e}")))?
            .sample(rng) as usize;
        let label = ClassLabel::from(CLUTTER_LABEL);
        for _ in 0..count {
            let rho = rng.random_range(MIN_RANGE..=cfg.max_range);
            let theta = wrap_angle(rng.random_range(-0.5 * cfg.fov..=0.5 * cfg.fov));
            detections.push(Detection {
                class_label: label.clone(),
                rho,
                theta,
            });
        }
    }
    Ok(SemanticObservation { detections })
}

/// Noiseless detections predicted for a hypothesis. Without occlusion this
/// is a single pass over the map objects and casts no rays.
pub fn expected_semantic_obs(map: &WorldMap, hypothesis: &Pose2D, cfg: &SensorConfig) -> Result<SemanticObservation> {
    let visible = map.visible_objects(hypothesis, cfg.fov, cfg.max_range, cfg.occlusion)?;
    Ok(SemanticObservation {
        detections: visible
            .into_iter()
            .map(|v| Detection {
                class_label: v.class_label,
                rho: v.range,
                theta: v.bearing,
            })
            .collect(),
    })
}

/// Relative position of a detection in world coordinates as seen from `pose`.
pub fn detection_position(pose: &Pose2D, det: &Detection) -> Point2 {
    let a = pose.heading + det.theta;
    Point2::new(pose.x + det.rho * a.cos(), pose.y + det.rho * a.sin())
}
