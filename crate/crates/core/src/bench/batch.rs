use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ModelKind, TrialConfig};
use super::trial::{run_trial_on, trial_seed, RunMetrics};
use crate::error::{Error, Result};

pub const PER_STEP_CSV: &str = "per_step.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const REPORT_TXT: &str = "report.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub convergence_step: Option<usize>,
    pub final_error: f64,
    pub weight_update_ns: u64,
}

/// Aggregate of a batch of trials sharing one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub model: ModelKind,
    pub master_seed: u64,
    pub particles: usize,
    pub trials: Vec<TrialSummary>,
    /// Per-step position error averaged over trials, m.
    pub mean_error: Vec<f64>,
    /// Per-step position variance averaged over trials, m².
    pub mean_variance: Vec<f64>,
    pub mean_weight_update_ns: f64,
    pub mean_final_error: f64,
}

impl BatchReport {
    pub fn converged_trials(&self) -> usize {
        self.trials.iter().filter(|t| t.convergence_step.is_some()).count()
    }

    /// Upper median of the convergence steps, with "never" ranked last.
    pub fn median_convergence_step(&self) -> Option<usize> {
        let mut steps: Vec<Option<usize>> = self.trials.iter().map(|t| t.convergence_step).collect();
        steps.sort_by_key(|s| s.unwrap_or(usize::MAX));
        steps[steps.len() / 2]
    }

    pub fn median_final_error(&self) -> f64 {
        median(self.trials.iter().map(|t| t.final_error).collect())
    }

    fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model: {}", self.model);
        let _ = writeln!(out, "trials: {}", self.trials.len());
        let _ = writeln!(out, "particles: {}", self.particles);
        let _ = writeln!(out, "steps: {}", self.mean_error.len());
        let _ = writeln!(out, "master_seed: {}", self.master_seed);
        let _ = writeln!(out, "converged_trials: {}", self.converged_trials());
        let _ = writeln!(
            out,
            "median_convergence_step: {}",
            self.median_convergence_step()
                .map_or("NONE".to_string(), |s| s.to_string())
        );
        let _ = writeln!(out, "mean_final_error_m: {:.6}", self.mean_final_error);
        let _ = writeln!(out, "median_final_error_m: {:.6}", self.median_final_error());
        let _ = writeln!(out, "mean_weight_update_ns: {:.0}", self.mean_weight_update_ns);
        out
    }

    /// Writes `per_step.csv`, `summary.csv` and `report.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        #[derive(Serialize)]
        struct StepRow {
            step: usize,
            mean_error_m: f64,
            mean_variance_m2: f64,
        }
        let path = dir.join(PER_STEP_CSV);
        let mut w = csv::Writer::from_path(&path)?;
        for (step, (e, v)) in self.mean_error.iter().zip(&self.mean_variance).enumerate() {
            w.serialize(StepRow {
                step,
                mean_error_m: *e,
                mean_variance_m2: *v,
            })?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        #[derive(Serialize)]
        struct SummaryRow {
            trial: usize,
            seed: u64,
            convergence_step: String,
            final_error_m: f64,
            weight_update_ns: u64,
        }
        let path = dir.join(SUMMARY_CSV);
        let mut w = csv::Writer::from_path(&path)?;
        for t in &self.trials {
            w.serialize(SummaryRow {
                trial: t.trial,
                seed: t.seed,
                convergence_step: t
                    .convergence_step
                    .map_or("NONE".to_string(), |s| s.to_string()),
                final_error_m: t.final_error,
                weight_update_ns: t.weight_update_ns,
            })?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let path = dir.join(REPORT_TXT);
        fs::write(&path, self.render()).map_err(|e| Error::io(&path, e))
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Runs `n_trials` seeded trials of `cfg` and aggregates them. Trial `i`
/// uses [`trial_seed`]`(cfg.seed, i)`. Trials run in parallel; results are
/// combined in trial order. When `out_dir` is given the CSV files and the
/// text report are written there.
pub fn run_batch(cfg: &TrialConfig, n_trials: usize, out_dir: Option<&Path>) -> Result<BatchReport> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("a batch needs at least one trial".into()));
    }
    let (map, trajectory) = cfg.resolve()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let runs: Vec<(u64, RunMetrics)> = (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(cfg.seed, i);
            let trial_cfg = TrialConfig {
                seed,
                ..cfg.clone()
            };
            run_trial_on(&trial_cfg, &map, &trajectory).map(|m| (seed, m))
        })
        .collect::<Result<_>>()?;

    let steps = cfg.steps;
    let n = n_trials as f64;
    let mut mean_error = vec![0.0; steps];
    let mut mean_variance = vec![0.0; steps];
    for (_, m) in &runs {
        for k in 0..steps {
            mean_error[k] += m.errors[k];
            mean_variance[k] += m.variances[k];
        }
    }
    for k in 0..steps {
        mean_error[k] /= n;
        mean_variance[k] /= n;
    }
    if mean_error.iter().chain(&mean_variance).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("averaged curves"));
    }

    let trials: Vec<TrialSummary> = runs
        .iter()
        .enumerate()
        .map(|(trial, (seed, m))| TrialSummary {
            trial,
            seed: *seed,
            convergence_step: m.convergence_step,
            final_error: m.final_error,
            weight_update_ns: m.total_weight_update_ns,
        })
        .collect();
    let mean_weight_update_ns = trials.iter().map(|t| t.weight_update_ns as f64).sum::<f64>() / n;
    let mean_final_error = trials.iter().map(|t| t.final_error).sum::<f64>() / n;

    let report = BatchReport {
        model: cfg.model,
        master_seed: cfg.seed,
        particles: cfg.particles,
        trials,
        mean_error,
        mean_variance,
        mean_weight_update_ns,
        mean_final_error,
    };
    if let Some(dir) = out_dir {
        report.write(dir)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub semantic: BatchReport,
    pub geometric: BatchReport,
    /// Mean geometric weight-update time over mean semantic time.
    pub time_ratio: f64,
}

impl Comparison {
    fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "semantic_mean_weight_update_ns: {:.0}", self.semantic.mean_weight_update_ns);
        let _ = writeln!(out, "geometric_mean_weight_update_ns: {:.0}", self.geometric.mean_weight_update_ns);
        let _ = writeln!(out, "ratio_geometric_over_semantic: {:.4}", self.time_ratio);
        let _ = writeln!(out, "semantic_mean_final_error_m: {:.6}", self.semantic.mean_final_error);
        let _ = writeln!(out, "geometric_mean_final_error_m: {:.6}", self.geometric.mean_final_error);
        out
    }
}

/// Runs the same batch with both measurement models and identical seeds.
/// Per-model outputs go to `out_dir/semantic` and `out_dir/geometric`, the
/// comparison to `out_dir/report.txt`.
pub fn compare_models(cfg: &TrialConfig, n_trials: usize, out_dir: Option<&Path>) -> Result<Comparison> {
    let batch = |model: ModelKind| {
        let cfg = TrialConfig {
            model,
            ..cfg.clone()
        };
        let dir = out_dir.map(|d| d.join(model.name()));
        run_batch(&cfg, n_trials, dir.as_deref())
    };
    let semantic = batch(ModelKind::Semantic)?;
    let geometric = batch(ModelKind::Geometric)?;
    let time_ratio = geometric.mean_weight_update_ns / semantic.mean_weight_update_ns;
    if !(time_ratio.is_finite() && time_ratio > 0.0) {
        return Err(Error::NonFinite("timing ratio"));
    }
    let comparison = Comparison {
        semantic,
        geometric,
        time_ratio,
    };
    if let Some(dir) = out_dir {
        let path = dir.join(REPORT_TXT);
        fs::write(&path, comparison.render()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(comparison)
}
