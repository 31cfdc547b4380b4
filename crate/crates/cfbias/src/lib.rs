//! Benchmarking library for treatment-assignment bias in counterfactual
//! prediction. Simulates observational assignment policies with a
//! controllable bias scale over synthetic, semi-synthetic and empirical
//! potential-outcome data, quantifies information-theoretic biases, trains
//! a suite of counterfactual learners and reports outcome, effect and
//! biomarker metrics across bias sweeps.

pub mod attribution;
pub mod bias;
pub mod dgp;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod learners;
pub mod metrics;
pub mod numerics;
pub mod policy;
pub mod selftest;

pub use error::{Error, Result};
