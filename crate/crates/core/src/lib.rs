//! Interacting growth process on finite graphs.
//!
//! Particles are allocated one at a time; vertex `v` receives the next one
//! with probability proportional to `exp(α x_v + β Σ_{u∼v} x_u)`. This crate
//! holds everything that is pure computation: graphs and maximal cliques,
//! the sampler, final-clique detection, exact small-horizon oracles and
//! closed-form bounds, and trajectory analysis. It is `no_std` and needs
//! only `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod detection;
pub mod error;
pub mod exact;
pub mod graph;
pub mod math;
pub mod process;
pub mod rates;

pub use detection::{check_final_properties, final_maximal_clique, TieBreak};
pub use error::{Error, Result};
pub use graph::{
    d_sets, enumerate_maximal_cliques, is_connected, is_maximal_clique, validate_partition,
    DPartition, Graph, OrderedClique,
};
pub use process::{run, run_stream, step, transition_probs, Trajectory};
pub use rates::{ExponentCache, Interaction, RateModel, RateParams, Regime, State};
