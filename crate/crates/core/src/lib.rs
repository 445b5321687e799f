//! Consensus+innovations distributed inference over directed networks.
//!
//! Nodes average their neighbours' states and fold in fresh local
//! observations with weight `1/t`. The crate computes the large-deviations
//! rate of each node's error probability, designs networks that maximize
//! it, and checks both against Monte Carlo simulation.
//!
//! - [`observation`]: observation models, log-MGFs and their conjugates.
//! - [`network`]: topologies, stochastic matrices, link failures, spectra.
//! - [`consensus`]: the recursion, Monte Carlo error probabilities, slope fits.
//! - [`rates`]: the network rate function and its isolation/fusion bounds.
//! - [`design`]: optimal left Perron vector and weight-matrix synthesis.
//! - [`cli`]: spec files and the command-line subcommands.

pub mod cli;
pub mod consensus;
pub mod design;
pub mod error;
pub mod linalg;
pub mod network;
pub mod observation;
pub mod rate;
pub mod rates;
pub mod rng;

pub use error::{Error, Result};
pub use rate::Rate;
