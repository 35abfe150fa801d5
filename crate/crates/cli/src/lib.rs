//! Scenario files, subcommands and output formats for the `quadchain` binary.

pub mod commands;
pub mod output;
pub mod scenario;
