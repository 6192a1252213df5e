//! Command-line front end for `fracpq-core`: flag and config-file parsing,
//! the subcommands, and CSV / JSON result records.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod record;

pub use commands::{run, Outcome};
pub use config::{Cli, Command, Emit, RunConfig, Task};
pub use error::{CliError, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_OK};
pub use record::{Cell, Emitter, ResultRecord, Table};
