//! Measurement models.
//!
//! The geometric model compares range arrays beam by beam. The semantic
//! model pairs up detections of the same class between the observed and the
//! predicted object lists, scores the paired range and bearing differences
//! with zero-centered Gaussian kernels (one family for ranges, one for
//! bearings), and then discounts the score once for every detection left
//! unpaired on either side.
//!
//! All kernels are unit-peak, so a perfect match scores exactly 1. The
//! filter normalizes weights across particles, so the missing Gaussian
//! normalization constants cancel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::filter::LikelihoodModel;
use crate::sensing::{
    expected_range_scan_with, expected_semantic_obs, RangeScan, SemanticObservation, SensorConfig,
};
use crate::world::{wrap_angle, Pose2D, WorldMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemanticParams {
    pub sigma_rho: f64,
    pub sigma_theta: f64,
    /// Factor applied once per unmatched detection, in `(0, 1]`.
    pub unmatched_penalty: f64,
    pub gate_rho: f64,
    pub gate_theta: f64,
}

impl Default for SemanticParams {
    fn default() -> Self {
        SemanticParams {
            sigma_rho: 0.5,
            sigma_theta: 0.05,
            unmatched_penalty: 0.5,
            gate_rho: 1.5,
            gate_theta: 0.15,
        }
    }
}

impl SemanticParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        positive("sigma_rho", self.sigma_rho)?;
        positive("sigma_theta", self.sigma_theta)?;
        positive("gate_rho", self.gate_rho)?;
        positive("gate_theta", self.gate_theta)?;
        if !(self.unmatched_penalty > 0.0 && self.unmatched_penalty <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "unmatched_penalty must lie in (0, 1], got {}",
                self.unmatched_penalty
            )));
        }
        Ok(())
    }
}

/// Pairing between an observed list `z_r` and a predicted list `z_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    /// `(index into z_r, index into z_k)`, in acceptance order.
    pub pairs: Vec<(usize, usize)>,
    /// Number of pairs.
    pub m: usize,
    /// Detections present in only one of the lists: `q + l - 2m`.
    pub d: usize,
}

/// Greedy one-to-one matching of detections with equal class labels.
///
/// Candidate pairs inside both gates are ranked by their normalized
/// distance `√((Δρ/σρ)² + (Δθ/σθ)²)`, ties broken by the lower `z_r` index
/// and then the lower `z_k` index, and accepted in that order whenever both
/// ends are still free.
pub fn match_objects(
    z_r: &SemanticObservation,
    z_k: &SemanticObservation,
    params: &SemanticParams,
) -> MatchResult {
    let mut candidates = Vec::new();
    for (i, a) in z_r.detections.iter().enumerate() {
        for (j, b) in z_k.detections.iter().enumerate() {
            if a.class_label != b.class_label {
                continue;
            }
            let d_rho = a.rho - b.rho;
            let d_theta = wrap_angle(a.theta - b.theta);
            if d_rho.abs() > params.gate_rho || d_theta.abs() > params.gate_theta {
                continue;
            }
            let dist = (d_rho / params.sigma_rho).hypot(d_theta / params.sigma_theta);
            candidates.push((dist, i, j));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut used_r = vec![false; z_r.len()];
    let mut used_k = vec![false; z_k.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !used_r[i] && !used_k[j] {
            used_r[i] = true;
            used_k[j] = true;
            pairs.push((i, j));
        }
    }
    let m = pairs.len();
    MatchResult {
        pairs,
        m,
        d: z_r.len() + z_k.len() - 2 * m,
    }
}

/// Log of [`semantic_likelihood`].
pub fn semantic_log_likelihood(
    z_r: &SemanticObservation,
    z_k: &SemanticObservation,
    params: &SemanticParams,
) -> f64 {
    let matched = match_objects(z_r, z_k, params);
    let inv_rho = 1.0 / (2.0 * params.sigma_rho * params.sigma_rho);
    let inv_theta = 1.0 / (2.0 * params.sigma_theta * params.sigma_theta);
    let mut log_w = 0.0;
    for &(i, j) in &matched.pairs {
        let a = &z_r.detections[i];
        let b = &z_k.detections[j];
        let d_rho = a.rho - b.rho;
        let d_theta = wrap_angle(a.theta - b.theta);
        log_w -= d_rho * d_rho * inv_rho + d_theta * d_theta * inv_theta;
    }
    log_w + matched.d as f64 * params.unmatched_penalty.ln()
}

/// How well two object lists agree: product of range and bearing kernels
/// over matched pairs, times `unmatched_penalty^d`. Symmetric in its
/// arguments; two empty lists score 1.
pub fn semantic_likelihood(
    z_r: &SemanticObservation,
    z_k: &SemanticObservation,
    params: &SemanticParams,
) -> f64 {
    let matched = match_objects(z_r, z_k, params);
    let mut w = 1.0;
    for &(i, j) in &matched.pairs {
        let a = &z_r.detections[i];
        let b = &z_k.detections[j];
        w *= gaussian_kernel(a.rho - b.rho, params.sigma_rho)
            * gaussian_kernel(wrap_angle(a.theta - b.theta), params.sigma_theta);
    }
    w * params.unmatched_penalty.powi(matched.d as i32)
}

/// Zero-centered Gaussian with unit peak.
fn gaussian_kernel(x: f64, sigma: f64) -> f64 {
    (-x * x / (2.0 * sigma * sigma)).exp()
}

fn check_scans(expected: &RangeScan, observed: &RangeScan, sigma_range: f64) -> Result<()> {
    if !(sigma_range > 0.0 && sigma_range.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma_range must be positive, got {sigma_range}"
        )));
    }
    if expected.len() != observed.len() || expected.bearings.len() != observed.bearings.len() {
        return Err(Error::ScanMismatch(format!(
            "{} expected beams vs {} observed",
            expected.len(),
            observed.len()
        )));
    }
    if expected.bearings != observed.bearings {
        return Err(Error::ScanMismatch("bearing arrays differ".into()));
    }
    Ok(())
}

/// Log of [`geometric_likelihood`].
pub fn geometric_log_likelihood(expected: &RangeScan, observed: &RangeScan, sigma_range: f64) -> Result<f64> {
    check_scans(expected, observed, sigma_range)?;
    let inv = 1.0 / (2.0 * sigma_range * sigma_range);
    let max_range = observed.max_range;
    let mut log_w = 0.0;
    for (e, o) in expected.ranges.iter().zip(&observed.ranges) {
        let diff = match (e, o) {
            (None, None) => continue,
            (Some(e), Some(o)) => o - e,
            (Some(r), None) | (None, Some(r)) => max_range - r,
        };
        log_w -= diff * diff * inv;
    }
    Ok(log_w)
}

/// Product over beams of `exp(-(r_obs - r_exp)² / 2σ²)`. A beam missing in
/// both scans contributes 1; a beam missing in only one is compared against
/// the maximum range.
pub fn geometric_likelihood(expected: &RangeScan, observed: &RangeScan, sigma_range: f64) -> Result<f64> {
    geometric_log_likelihood(expected, observed, sigma_range).map(f64::exp)
}

/// Semantic measurement model: compares the observed detections with the
/// ones predicted from the map for each hypothesis. Hypotheses outside the
/// free space score 0.
#[derive(Debug, Clone)]
pub struct SemanticModel {
    cfg: SensorConfig,
    params: SemanticParams,
}

pub fn make_semantic_model(cfg: &SensorConfig, params: &SemanticParams) -> Result<SemanticModel> {
    cfg.validate()?;
    params.validate()?;
    Ok(SemanticModel {
        cfg: cfg.noiseless(),
        params: *params,
    })
}

impl LikelihoodModel for SemanticModel {
    type Observation = SemanticObservation;

    fn likelihood(&self, pose: &Pose2D, z: &SemanticObservation, map: &WorldMap) -> Result<f64> {
        self.log_likelihood(pose, z, map).map(f64::exp)
    }

    fn log_likelihood(&self, pose: &Pose2D, z: &SemanticObservation, map: &WorldMap) -> Result<f64> {
        if !map.is_free(pose.position()) {
            return Ok(f64::NEG_INFINITY);
        }
        let expected = expected_semantic_obs(map, pose, &self.cfg)?;
        Ok(semantic_log_likelihood(z, &expected, &self.params))
    }
}

/// Geometric measurement model: compares the observed scan with the scan
/// ray-cast from each hypothesis. Hypotheses outside the free space score 0.
#[derive(Debug, Clone)]
pub struct GeometricModel {
    cfg: SensorConfig,
    bearings: Vec<f64>,
    sigma_range: f64,
}

pub fn make_geometric_model(cfg: &SensorConfig, sigma_range: f64) -> Result<GeometricModel> {
    cfg.validate()?;
    if !(sigma_range > 0.0 && sigma_range.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma_range must be positive, got {sigma_range}"
        )));
    }
    Ok(GeometricModel {
        bearings: cfg.beam_bearings(),
        cfg: cfg.noiseless(),
        sigma_range,
    })
}

impl LikelihoodModel for GeometricModel {
    type Observation = RangeScan;

    fn likelihood(&self, pose: &Pose2D, z: &RangeScan, map: &WorldMap) -> Result<f64> {
        self.log_likelihood(pose, z, map).map(f64::exp)
    }

    fn log_likelihood(&self, pose: &Pose2D, z: &RangeScan, map: &WorldMap) -> Result<f64> {
        if !map.is_free(pose.position()) {
            return Ok(f64::NEG_INFINITY);
        }
        let expected = expected_range_scan_with(map, pose, self.bearings.clone(), self.cfg.max_range)?;
        geometric_log_likelihood(&expected, z, self.sigma_range)
    }
}
