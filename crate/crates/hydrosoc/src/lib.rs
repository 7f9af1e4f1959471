//! File formats, result writers and the command-line front end for
//! `hydrosoc-core`.

pub mod cli;
pub mod inp;
pub mod manifest;
pub mod output;
pub mod scenario_file;
pub mod tables;

pub use inp::{parse_network, serialize_network, InpError};
pub use scenario_file::{parse_scenario, serialize_scenario, ScenarioFileError};
