//! Library half of the `slnq` binary: configuration, file formats and
//! subcommands, kept out of `main` so the integration tests can drive them.

pub mod commands;
pub mod io;

pub use commands::{run, Cli, Command, Outcome, RunConfig};
