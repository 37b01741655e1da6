//! Command-line front end and backend orchestration.

pub mod cli;
pub mod plan;
pub mod report;
pub mod run;

pub use cli::{parse_cli, CliAction, Invocation, USAGE};
pub use plan::{two_round_sizes, TwoRoundPlan};
pub use report::Report;
pub use run::run;
