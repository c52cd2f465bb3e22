//! Monte Carlo sweeps over user C's SNR for every decoder profile, and their CSV output.

mod config;
mod output;
mod sim;

pub use config::ScenarioConfig;
pub use output::{emit_results, manifest_path, read_csv, write_csv, CSV_HEADER};
pub use sim::{run_scenario, run_trial, trial_seed, ResultRow, Stage, TrialCounts};
