//! Majority dynamics on G(n, p) random graphs: sampling, simulation, exact
//! small-graph oracles, closed-form bound evaluation and Monte Carlo
//! ensembles.

pub mod analytics;
pub mod bitset;
pub mod coloring;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod oracle;
pub mod rng;
pub mod selftest;
pub mod spectral;

pub use bitset::BitSet;
pub use coloring::{Color, Coloring};
pub use dynamics::{delta, lazy_step, majority_step, run, run_with, LazyParams, RunOptions, Trajectory, Variant, Winner};
pub use error::{Error, Result};
pub use graph::{sample_gnp, sample_gnp_with, Graph, Layout};
pub use rng::{derive_stream, RngStream};
