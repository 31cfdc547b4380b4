//! Deterministic numeric primitives shared by all modules: dense matrices,
//! a splittable seeded RNG, standardization, entropy helpers and automatic
//! histogram binning.

mod binning;
mod matrix;
mod rng;
mod stats;

pub use binning::{auto_bins, auto_bins_capped, BinEdges};
pub use matrix::{cholesky_solve, Matrix};
pub use rng::{mix_seed, Draws, RngStream};
pub use stats::{
    binary_entropy, mean, population_std, quantile_sorted, sigmoid, spearman_rho, standardize,
};
