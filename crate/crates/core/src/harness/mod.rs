//! Scenario execution, brute-force reference, metrics and fuzzing.

pub mod engine;
pub mod fuzz;
pub mod invariants;
pub mod oracle;
pub mod scenario;
pub mod stats;
pub mod timeline;

pub use engine::{run_scenario, ActionOutcome, ActionResult, SimConfig, Simulation};
pub use oracle::{compare, oracle_check, oracle_run, OracleComparison, DEFAULT_STEP_MS};
pub use scenario::{load_scenario, resolve_catalog, Action, Mode, Scenario, ScenarioError, ScenarioEvent, BUILTIN_SAMPLE};
pub use stats::{compute_stats, SharingStats};
pub use timeline::{ChangePoint, Timeline, Track};
