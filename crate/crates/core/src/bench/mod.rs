//! Block-world benchmark: scenario construction, seeded trial runs, batch
//! aggregation, and CSV/text reporting.

mod batch;
mod config;
mod scenario;
mod trial;

pub use batch::{compare_models, run_batch, BatchReport, Comparison, TrialSummary};
pub use config::{InitMode, LikelihoodConfig, MapSource, ModelKind, SensorSuite, TrialConfig};
pub use scenario::{build_block_world, default_trajectory, Trajectory, BLOCK_HALF_EXTENT, TRAJECTORY_CLEARANCE};
pub use trial::{run_trial, run_trial_on, time_to_convergence, trial_seed, RunMetrics};
