//! Config loading, parameter sweeps with CSV output, and the validation suite.

pub mod config;
pub mod sweep;
pub mod validate;

pub use config::{load_config, parse_config, ArrayKind, Axis, Method, SweepConfig};
pub use sweep::{run_sweep, threads_from_env, write_csv, ResultRow, RunOptions, CSV_COLUMNS};
pub use validate::{format_report, run_suite, CheckOutcome, DerivativeSource, LibraryDerivatives};
