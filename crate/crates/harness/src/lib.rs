//! Command-line front end for `nof-core`: protocol spec files, single runs, sweeps over
//! `(k, n)` and the cost separation table.

pub mod cli;
pub mod error;
pub mod separation;
pub mod sweep;

pub use cli::run_cli;
pub use error::{HarnessError, Result};
pub use separation::{adjust_n, separation_table, SeparationRow};
pub use sweep::{parse_range, run_sweep, ProtocolSelector, ResultRow, SweepConfig, SweepMode};
