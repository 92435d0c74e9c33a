//! JSON documents, reports and subcommand bodies behind the `vesselkit` binary.

pub mod commands;
pub mod error;
pub mod report;
pub mod schema;
pub mod settings;
