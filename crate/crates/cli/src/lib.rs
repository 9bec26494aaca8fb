//! Scenario files, batch runs, CSV/JSON output and verification suites for the
//! `qfilt` command-line tool.

pub mod config;
pub mod io;
pub mod report;
pub mod run;
pub mod verify;

pub use config::{load_scenario, ConfigError, Overrides, Scenario, ScenarioConfig};
pub use report::{Check, Report};
pub use run::{filter_records, run_scenario};
pub use verify::{run_suite, Suite};
