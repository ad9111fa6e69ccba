//! Volume sampling and leverage-score methods for subsampled least squares.
//!
//! Given a tall full-rank design matrix, the samplers here draw small row
//! subsets or weighted row sequences whose induced least-squares solutions
//! are exactly unbiased for the full-data optimum, with loss guarantees that
//! plain i.i.d. leverage-score sampling does not provide. The crate is laid
//! out in layers:
//!
//! * [`linalg`]: Gram factorizations, leverage scores, minimum-norm solves;
//! * [`sampling`]: volume sampling of subsets, rescaled sequence sampling,
//!   the determinantal rejection sampler and its sketched variant;
//! * [`estimators`]: subsampled least-squares estimators and their losses;
//! * [`verify`]: exhaustive and statistical checks of the distributional
//!   identities the samplers rely on;
//! * [`experiments`]: dataset loading, the hard lower-bound instance, and
//!   the loss-curve harness.
//!
//! Everything randomized takes an explicit [`rng::RngState`] and is
//! reproducible bit for bit given the same seed.

pub mod enumerate;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod linalg;
pub mod rng;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
