//! File formats, replica-parallel Monte Carlo and the command-line front end
//! for `cliqueloc-core`.

pub mod cli;
pub mod formats;
pub mod replicas;

pub use formats::{parse_graph, read_graph, FormatError};
