//! Sampling-importance-resampling particle filter over planar poses.
//!
//! One filter cycle ([`step`]) predicts every particle through the noisy
//! motion model, reweights it by the measurement likelihood, and resamples
//! with the systematic scheme once the effective sample size drops below a
//! fraction of the particle count. Because the proposal is the motion model,
//! the importance weight of a particle reduces to its measurement likelihood.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{wrap_angle, Point2, Pose2D, WorldMap};

/// Tolerance on the weight sum of a normalized set.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Consecutive rejected draws after which the free space is declared empty.
const MAX_REJECTIONS: usize = 100_000;

/// Measurement model `p(z | x)` evaluated per hypothesis.
///
/// Implementations must be pure: the same inputs always give the same
/// value. `likelihood` must be finite and non-negative.
pub trait LikelihoodModel: Sync {
    type Observation: ?Sized + Sync;

    fn likelihood(&self, pose: &Pose2D, z: &Self::Observation, map: &WorldMap) -> Result<f64>;

    /// Natural log of [`likelihood`](Self::likelihood); `-inf` for a zero
    /// factor. Models whose products underflow should override this.
    fn log_likelihood(&self, pose: &Pose2D, z: &Self::Observation, map: &WorldMap) -> Result<f64> {
        let w = self.likelihood(pose, z, map)?;
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidLikelihood { index: 0, value: w });
        }
        Ok(w.ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionNoise {
    pub trans: f64,
    pub rot1: f64,
    pub rot2: f64,
}

/// Odometry increment: turn by `rot1`, translate by `trans`, turn by `rot2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionCommand {
    pub trans: f64,
    pub rot1: f64,
    pub rot2: f64,
    #[serde(default)]
    pub noise: MotionNoise,
}

impl MotionCommand {
    pub fn new(rot1: f64, trans: f64, rot2: f64) -> Self {
        MotionCommand {
            trans,
            rot1,
            rot2,
            noise: MotionNoise::default(),
        }
    }

    pub fn with_noise(mut self, noise: MotionNoise) -> Self {
        self.noise = noise;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.trans, self.rot1, self.rot2];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("motion command must be finite".into()));
        }
        let sig = [self.noise.trans, self.noise.rot1, self.noise.rot2];
        if sig.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument(
                "motion noise standard deviations must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Applies the command without noise.
    pub fn apply(&self, pose: &Pose2D) -> Pose2D {
        apply_motion(pose, self.rot1, self.trans, self.rot2)
    }

    fn sample<R: Rng + ?Sized>(&self, pose: &Pose2D, rng: &mut R) -> Pose2D {
        let rot1 = self.rot1 + perturbation(rng, self.noise.rot1);
        let trans = self.trans + perturbation(rng, self.noise.trans);
        let rot2 = self.rot2 + perturbation(rng, self.noise.rot2);
        apply_motion(pose, rot1, trans, rot2)
    }
}

fn apply_motion(pose: &Pose2D, rot1: f64, trans: f64, rot2: f64) -> Pose2D {
    let course = pose.heading + rot1;
    Pose2D {
        x: pose.x + trans * course.cos(),
        y: pose.y + trans * course.sin(),
        heading: wrap_angle(course + rot2),
    }
}

fn perturbation<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        sigma * z
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub pose: Pose2D,
    pub weight: f64,
}

/// Weighted pose samples. Never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    particles: Vec<Particle>,
    normalized: bool,
}

/// Point estimate and spread of a particle set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: Pose2D,
    /// Weighted mean squared distance to the mean position, m².
    pub position_variance: f64,
    /// One minus the resultant length of the weighted heading vectors.
    pub heading_dispersion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightUpdate {
    /// Every weight came out zero and the set was reset to uniform.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    /// Effective sample size after reweighting, before any resampling.
    pub ess: f64,
    pub degenerate: bool,
    pub resampled: bool,
    pub estimate: Estimate,
    /// Wall-clock time of the reweighting phase.
    pub weight_update_ns: u64,
}

impl ParticleSet {
    /// Builds a set from explicit particles; weights are normalized here.
    pub fn from_particles(particles: Vec<Particle>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::InvalidArgument("a particle set cannot be empty".into()));
        }
        if particles
            .iter()
            .any(|p| !(p.weight >= 0.0 && p.weight.is_finite()) || !p.pose.is_finite())
        {
            return Err(Error::InvalidArgument(
                "particle weights must be finite and non-negative, poses finite".into(),
            ));
        }
        let mut set = ParticleSet {
            particles,
            normalized: false,
        };
        set.normalize();
        Ok(set)
    }

    /// Equally weighted particles at the given poses.
    pub fn from_poses(poses: impl IntoIterator<Item = Pose2D>) -> Result<Self> {
        let particles: Vec<Particle> = poses
            .into_iter()
            .map(|pose| Particle { pose, weight: 1.0 })
            .collect();
        Self::from_particles(particles)
    }

    /// `n` poses drawn uniformly over the free space of `map`, headings
    /// uniform over `[-π, π)`.
    pub fn init_uniform<R: Rng + ?Sized>(map: &WorldMap, n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("particle count must be at least 1".into()));
        }
        let b = *map.bounds();
        if map.objects().iter().any(|o| o.rect().contains_rect(&b)) {
            return Err(Error::NoFreeSpace);
        }
        let mut poses = Vec::with_capacity(n);
        let mut rejected = 0;
        while poses.len() < n {
            let p = Point2::new(
                rng.random_range(b.min.x..b.max.x),
                rng.random_range(b.min.y..b.max.y),
            );
            let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            if map.is_free(p) {
                poses.push(Pose2D::new(p.x, p.y, heading));
                rejected = 0;
            } else {
                rejected += 1;
                if rejected >= MAX_REJECTIONS {
                    return Err(Error::NoFreeSpace);
                }
            }
        }
        Self::from_poses(poses)
    }

    /// `n` poses drawn from a Gaussian around `center`, kept in free space.
    pub fn init_gaussian<R: Rng + ?Sized>(
        map: &WorldMap,
        center: &Pose2D,
        sigma_xy: f64,
        sigma_heading: f64,
        n: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("particle count must be at least 1".into()));
        }
        if !(sigma_xy >= 0.0 && sigma_heading >= 0.0) {
            return Err(Error::InvalidArgument("prior spread must be non-negative".into()));
        }
        let mut poses = Vec::with_capacity(n);
        let mut rejected = 0;
        while poses.len() < n {
            let pose = Pose2D::new(
                center.x + perturbation(rng, sigma_xy),
                center.y + perturbation(rng, sigma_xy),
                center.heading + perturbation(rng, sigma_heading),
            );
            if map.is_free(pose.position()) {
                poses.push(pose);
                rejected = 0;
            } else {
                rejected += 1;
                if rejected >= MAX_REJECTIONS {
                    return Err(Error::NoFreeSpace);
                }
            }
        }
        Self::from_poses(poses)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.particles.iter().map(|p| p.weight)
    }

    fn normalize(&mut self) -> bool {
        let total: f64 = self.weights().sum();
        let degenerate = !(total > 0.0 && total.is_finite());
        let n = self.particles.len() as f64;
        for p in &mut self.particles {
            p.weight = if degenerate { 1.0 / n } else { p.weight / total };
        }
        self.normalized = true;
        degenerate
    }

    fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::NotNormalized)
        }
    }

    /// Moves every particle through the noisy motion model. Weights are left
    /// untouched.
    pub fn predict<R: Rng + ?Sized>(&mut self, cmd: &MotionCommand, rng: &mut R) -> Result<()> {
        cmd.validate()?;
        for p in &mut self.particles {
            p.pose = cmd.sample(&p.pose, rng);
        }
        Ok(())
    }

    /// Multiplies each weight by the measurement likelihood of its pose and
    /// renormalizes. When every weight comes out zero the set is reset to
    /// uniform and the update is flagged degenerate.
    ///
    /// Accumulation happens in the log domain so that sharply peaked
    /// likelihoods cannot underflow the whole set at once.
    pub fn update_weights<M: LikelihoodModel + ?Sized>(
        &mut self,
        model: &M,
        z: &M::Observation,
        map: &WorldMap,
    ) -> Result<WeightUpdate> {
        let mut log_w = Vec::with_capacity(self.particles.len());
        for (index, p) in self.particles.iter().enumerate() {
            let ll = model.log_likelihood(&p.pose, z, map).map_err(|e| match e {
                Error::InvalidLikelihood { value, .. } => Error::InvalidLikelihood { index, value },
                other => other,
            })?;
            if ll.is_nan() || ll == f64::INFINITY {
                return Err(Error::InvalidLikelihood {
                    index,
                    value: ll.exp(),
                });
            }
            log_w.push(p.weight.ln() + ll);
        }
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            let n = self.particles.len() as f64;
            for p in &mut self.particles {
                p.weight = 1.0 / n;
            }
            self.normalized = true;
            return Ok(WeightUpdate { degenerate: true });
        }
        for (p, lw) in self.particles.iter_mut().zip(&log_w) {
            p.weight = (lw - max).exp();
        }
        let degenerate = self.normalize();
        Ok(WeightUpdate { degenerate })
    }

    /// `1 / Σ wᵢ²`, between 1 and the particle count.
    pub fn effective_sample_size(&self) -> Result<f64> {
        self.require_normalized()?;
        let sum_sq: f64 = self.weights().map(|w| w * w).sum();
        let n = self.particles.len() as f64;
        Ok((1.0 / sum_sq).clamp(1.0, n))
    }

    /// Low-variance resampling: one uniform offset, `N` evenly spaced
    /// pointers into the cumulative weights. Output weights are uniform.
    pub fn resample_systematic<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.require_normalized()?;
        let n = self.particles.len();
        let offset: f64 = rng.random::<f64>();
        let mut out = Vec::with_capacity(n);
        // cumulative weight in units of 1/N, so pointer i sits at i + offset
        let mut cumulative = 0.0;
        let mut j = 0;
        for i in 0..n {
            let pointer = i as f64 + offset;
            while j < n {
                let next = cumulative + self.particles[j].weight * n as f64;
                if pointer < next {
                    break;
                }
                cumulative = next;
                j += 1;
            }
            let src = self.particles[j.min(n - 1)];
            out.push(Particle {
                pose: src.pose,
                weight: 1.0 / n as f64,
            });
        }
        self.particles = out;
        Ok(())
    }

    /// Weighted mean position, circular mean heading, and their spreads.
    pub fn estimate(&self) -> Result<Estimate> {
        self.require_normalized()?;
        let (mut mx, mut my, mut sx, mut sy) = (0.0, 0.0, 0.0, 0.0);
        for p in &self.particles {
            mx += p.weight * p.pose.x;
            my += p.weight * p.pose.y;
            sx += p.weight * p.pose.heading.cos();
            sy += p.weight * p.pose.heading.sin();
        }
        let position_variance = self
            .particles
            .iter()
            .map(|p| p.weight * ((p.pose.x - mx).powi(2) + (p.pose.y - my).powi(2)))
            .sum();
        let resultant = sx.hypot(sy);
        let heading = if resultant > 0.0 { sy.atan2(sx) } else { 0.0 };
        Ok(Estimate {
            mean: Pose2D::new(mx, my, heading),
            position_variance,
            heading_dispersion: (1.0 - resultant).max(0.0),
        })
    }
}

/// One filter cycle: predict, reweight, then resample when the effective
/// sample size falls below `resample_threshold · N`.
#[allow(clippy::too_many_arguments)]
pub fn step<M, R>(
    set: &mut ParticleSet,
    cmd: &MotionCommand,
    z: &M::Observation,
    model: &M,
    map: &WorldMap,
    rng: &mut R,
    resample_threshold: f64,
) -> Result<StepDiagnostics>
where
    M: LikelihoodModel + ?Sized,
    R: Rng + ?Sized,
{
    if !(0.0..=1.0).contains(&resample_threshold) {
        return Err(Error::InvalidArgument(format!(
            "resample threshold must lie in [0, 1], got {resample_threshold}"
        )));
    }
    set.predict(cmd, rng)?;

    let started = Instant::now();
    let update = set.update_weights(model, z, map)?;
    let weight_update_ns = u64::try_from(started.elapsed().as_nanos()).unwrap_or(u64::MAX);

    let ess = set.effective_sample_size()?;
    let estimate = set.estimate()?;
    let resampled = ess < resample_threshold * set.len() as f64;
    if resampled {
        set.resample_systematic(rng)?;
    }
    Ok(StepDiagnostics {
        ess,
        degenerate: update.degenerate,
        resampled,
        estimate,
        weight_update_ns,
    })
}
