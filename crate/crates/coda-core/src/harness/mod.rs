//! Scenario I/O, seeded scenario generation and experiment sweeps.

mod generate;
mod scenario;
mod sweep;

pub use generate::{generate_scenario, GenParams};
pub use scenario::{load_scenario, load_scenario_str, Scenario, ScenarioDoc, ScenarioError};
pub use sweep::{emit_results, run_sweep, to_csv, to_json, Algorithm, ResultRow, Sweep, SweepKind};
