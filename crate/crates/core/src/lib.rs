//! Spectral gap estimation for reversible Markov chains from one observed
//! trajectory.
//!
//! The pipeline: simulate (or load) a trajectory, form the plug-in estimate
//! of the gap from its empirical transition counts ([`hks`]), and sharpen it
//! for slowly mixing chains by estimating the gap of the chain observed
//! every `A = 2^k` steps instead ([`doubling`]). [`chain`] provides exact
//! oracles to check against, and [`experiment`] runs seeded Monte Carlo
//! sweeps over all of it.

pub mod chain;
pub mod doubling;
pub mod error;
pub mod experiment;
pub mod hks;
pub mod linalg;
pub mod selfcheck;
pub mod trajectory;

pub use chain::{exact_gap, skip_chain, skipped_gap, GapValue, MarkovChain};
pub use doubling::{back_transform_h, estimate_gamma, select_skip, DoublingConfig, DoublingResult};
pub use error::{Error, Result};
pub use hks::{estimate_gap, GapEstimate, HksParams};
pub use linalg::DenseMatrix;
pub use trajectory::{simulate, skip, Start, Trajectory};
