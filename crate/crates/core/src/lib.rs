//! Lloyd's k-means method on smoothed instances: the iteration engine,
//! Gaussian perturbation, structural property checks on point sets,
//! Monte Carlo checks of the probability bounds and parameter sweeps.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod exec;
pub mod harness;
pub mod io;
pub mod model;
pub mod oracles;
pub mod perturbation;
pub mod props;
pub mod rng;

pub use engine::{
    audit, detect_epochs, lloyd_step, run, Audit, Epoch, InitMethod, IterationRecord, RunConfig, RunTrace, Termination,
};
pub use error::{LabError, Result};
pub use exec::Exec;
pub use harness::{run_sweep, SweepConfig, SweepResult};
pub use model::{potential, BisectorCrossing, ClusteringState, Instance, Point};
pub use perturbation::{perturb, MeanGenerator, PerturbationMeta};
pub use props::Verdict;
