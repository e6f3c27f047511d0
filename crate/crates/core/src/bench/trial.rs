use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{InitMode, ModelKind, TrialConfig};
use super::scenario::Trajectory;
use crate::error::{Error, Result};
use crate::filter::{step, LikelihoodModel, ParticleSet};
use crate::likelihood::{make_geometric_model, make_semantic_model};
use crate::sensing::{simulate_range_scan, simulate_semantic_obs};
use crate::world::{Pose2D, WorldMap};

const STREAM_INIT: u64 = 0;
const STREAM_OBSERVATION: u64 = 1;
const STREAM_FILTER: u64 = 2;

/// Per-step and summary metrics of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    /// Distance from the estimated mean position to the ground truth, m.
    pub errors: Vec<f64>,
    /// Weighted particle position variance, m².
    pub variances: Vec<f64>,
    pub weight_update_ns: Vec<u64>,
    pub convergence_step: Option<usize>,
    pub final_error: f64,
    pub total_weight_update_ns: u64,
}

/// splitmix64 finalizer; a bijection on `u64`.
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` in a batch: splitmix64 of
/// `master + (trial + 1) · 0x9E3779B97F4A7C15`. The multiplier is odd, so
/// distinct trial indices give distinct inputs and therefore distinct seeds.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
    splitmix64(master.wrapping_add((trial as u64).wrapping_add(1).wrapping_mul(GOLDEN)))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// First step from which the variance stays at or below `threshold` for the
/// rest of the series. `None` if it never settles. NaN counts as above.
pub fn time_to_convergence(variances: &[f64], threshold: f64) -> Option<usize> {
    match variances.iter().rposition(|v| !(*v <= threshold)) {
        None => Some(0),
        Some(last) if last + 1 < variances.len() => Some(last + 1),
        Some(_) => None,
    }
}

/// Runs one trial from `cfg`, loading its map and trajectory.
pub fn run_trial(cfg: &TrialConfig) -> Result<RunMetrics> {
    let (map, trajectory) = cfg.resolve()?;
    run_trial_on(cfg, &map, &trajectory)
}

/// Runs one trial on an already resolved map and trajectory.
///
/// The ground truth follows the commands exactly; the filter receives the
/// same commands and applies its own motion noise. Initialization,
/// observation noise and filter sampling draw from three independent
/// streams of the trial seed.
pub fn run_trial_on(cfg: &TrialConfig, map: &WorldMap, trajectory: &Trajectory) -> Result<RunMetrics> {
    cfg.validate(trajectory)?;
    let mut init_rng = stream(cfg.seed, STREAM_INIT);
    let mut set = match cfg.init {
        InitMode::Uniform => ParticleSet::init_uniform(map, cfg.particles, &mut init_rng)?,
        InitMode::Gaussian {
            sigma_xy,
            sigma_heading,
        } => ParticleSet::init_gaussian(
            map,
            &trajectory.start,
            sigma_xy,
            sigma_heading,
            cfg.particles,
            &mut init_rng,
        )?,
        InitMode::TruePose => ParticleSet::from_poses(vec![trajectory.start; cfg.particles])?,
    };

    let sensor = cfg.sensor_for_model();
    match cfg.model {
        ModelKind::Semantic => {
            let model = make_semantic_model(sensor, &cfg.likelihood.semantic)?;
            track(cfg, map, trajectory, &mut set, &model, |truth, rng| {
                simulate_semantic_obs(map, truth, sensor, rng)
            })
        }
        ModelKind::Geometric => {
            let model = make_geometric_model(sensor, cfg.likelihood.sigma_range)?;
            track(cfg, map, trajectory, &mut set, &model, |truth, rng| {
                simulate_range_scan(map, truth, sensor, rng)
            })
        }
    }
}

fn track<M, F>(
    cfg: &TrialConfig,
    map: &WorldMap,
    trajectory: &Trajectory,
    set: &mut ParticleSet,
    model: &M,
    mut observe: F,
) -> Result<RunMetrics>
where
    M: LikelihoodModel,
    M::Observation: Sized,
    F: FnMut(&Pose2D, &mut ChaCha8Rng) -> Result<M::Observation>,
{
    let mut obs_rng = stream(cfg.seed, STREAM_OBSERVATION);
    let mut filter_rng = stream(cfg.seed, STREAM_FILTER);
    let n = trajectory.commands.len();
    let mut errors = Vec::with_capacity(n);
    let mut variances = Vec::with_capacity(n);
    let mut weight_update_ns = Vec::with_capacity(n);

    let mut truth = trajectory.start;
    for cmd in &trajectory.commands {
        truth = cmd.apply(&truth);
        let z = observe(&truth, &mut obs_rng)?;
        let diag = step(set, cmd, &z, model, map, &mut filter_rng, cfg.resample_threshold)?;
        let error = diag.estimate.mean.position().distance(&truth.position());
        if !error.is_finite() {
            return Err(Error::NonFinite("position error"));
        }
        if !diag.estimate.position_variance.is_finite() {
            return Err(Error::NonFinite("position variance"));
        }
        errors.push(error);
        variances.push(diag.estimate.position_variance);
        weight_update_ns.push(diag.weight_update_ns);
    }

    Ok(RunMetrics {
        convergence_step: time_to_convergence(&variances, cfg.convergence_threshold),
        final_error: errors.last().copied().unwrap_or(0.0),
        total_weight_update_ns: weight_update_ns.iter().sum(),
        errors,
        variances,
        weight_update_ns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::SensorConfig;

    #[test]
    fn convergence_definition() {
        assert_eq!(time_to_convergence(&[5.0, 0.6, 0.4, 0.3], 0.5), Some(2));
        assert_eq!(time_to_convergence(&[5.0, 0.6, 0.7], 0.5), None);
        assert_eq!(time_to_convergence(&[0.4, 0.7, 0.2, 0.1], 0.5), Some(2));
        assert_eq!(time_to_convergence(&[0.1, 0.2], 0.5), Some(0));
        assert_eq!(time_to_convergence(&[0.1, f64::NAN], 0.5), None);
        assert_eq!(time_to_convergence(&[], 0.5), Some(0));
    }

    #[test]
    fn seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for master in [0, 1, u64::MAX] {
            for i in 0..1000 {
                assert!(seen.insert((master, trial_seed(master, i))));
            }
        }
        let a: Vec<u64> = (0..1000).map(|i| trial_seed(7, i)).collect();
        let unique: std::collections::HashSet<_> = a.iter().collect();
        assert_eq!(unique.len(), a.len());
    }

    fn short_cfg(model: ModelKind) -> TrialConfig {
        let map = crate::bench::build_block_world();
        let mut traj = crate::bench::default_trajectory(&map).unwrap();
        traj.commands.truncate(15);
        TrialConfig {
            model,
            particles: 200,
            steps: 15,
            trajectory: Some(traj),
            seed: 99,
            ..TrialConfig::default()
        }
    }

    #[test]
    fn trial_is_deterministic() {
        for model in [ModelKind::Semantic, ModelKind::Geometric] {
            let cfg = short_cfg(model);
            let a = run_trial(&cfg).unwrap();
            let b = run_trial(&cfg).unwrap();
            assert_eq!(a.errors, b.errors);
            assert_eq!(a.variances, b.variances);
            assert_eq!(a.convergence_step, b.convergence_step);
            assert_eq!(a.errors.len(), 15);
        }
    }

    #[test]
    fn perfect_single_particle() {
        for model in [ModelKind::Semantic, ModelKind::Geometric] {
            let mut cfg = short_cfg(model);
            cfg.particles = 1;
            cfg.init = InitMode::TruePose;
            let traj = cfg.trajectory.as_mut().unwrap();
            for cmd in &mut traj.commands {
                cmd.noise = Default::default();
            }
            cfg.sensor.semantic = SensorConfig::semantic().noiseless();
            cfg.sensor.geometric = SensorConfig::geometric().noiseless();
            let m = run_trial(&cfg).unwrap();
            assert!(m.errors.iter().all(|e| *e == 0.0), "{:?}", m.errors);
            assert!(m.variances.iter().all(|v| *v == 0.0));
            assert_eq!(m.convergence_step, Some(0));
        }
    }
}
