//! Row subset and row sequence samplers.
//!
//! Two families of distributions over the rows of a design matrix:
//!
//! * subset sampling, where a size-k set of distinct rows is drawn with
//!   probability proportional to the squared volume it spans
//!   ([`volume_sample`]);
//! * rescaled sequence sampling, where k rows are drawn with repeats and
//!   carry importance weights, jointly reweighted by the determinant of the
//!   weighted Gram matrix ([`leveraged_volume_sample`] and relatives).
//!
//! All samplers take an explicit [`RngState`] and are deterministic given
//! `(seed, stream)`. Acceptance probabilities are mathematically confined to
//! `[0, 1]`; computed values are clamped there, and any clamp larger than
//! [`CLAMP_TOL`] trips a debug assertion because it indicates a numerical
//! bug rather than roundoff.

mod fast;
mod rescaled;
mod volume;

pub use fast::{
    epsilon_limit, fast_leveraged_volume_sample, sketch_rows, FastLeveragedSampler,
    FastSamplerOptions, FastTrace, WeakScores,
};
pub use rescaled::{
    compose_subsample, leverage_iid_sample, leveraged_volume_sample,
    leveraged_volume_sample_traced, proposal_count, rescaled_pmf, rescaled_sample_bruteforce,
    rescaled_sample_bruteforce_capped, RejectionTrace,
};
pub use volume::{
    coupled_sample, volume_marginal, volume_sample, volume_sample_pmf, CoupledSample,
};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::RngState;

/// Trial budget for every rejection loop. The loops used here have per-trial
/// success probability bounded well away from zero (at least 1/4 for the
/// determinantal rejection step), so exhausting the budget signals a bug,
/// not bad luck.
pub const MAX_TRIALS: usize = 1000;

/// Largest tolerated excursion of a computed probability outside `[0, 1]`.
pub const CLAMP_TOL: f64 = 1e-9;

/// Default cap on the support size a brute-force sampler will enumerate.
pub const ENUMERATION_CAP: u128 = 1_000_000;

/// Clamps a computed probability to `[0, 1]`, debug-asserting that the
/// excursion is within [`CLAMP_TOL`].
#[inline]
pub(crate) fn clamp_probability(p: f64) -> f64 {
    debug_assert!(
        (-CLAMP_TOL..=1.0 + CLAMP_TOL).contains(&p),
        "probability {p} drifted outside [0,1] beyond tolerance"
    );
    p.clamp(0.0, 1.0)
}

/// A probability distribution over row indices used for rescaled sampling.
///
/// Weights are strictly positive and sum to one within 1e-12; a cumulative
/// table is precomputed so single draws cost O(log n).
#[derive(Debug, Clone)]
pub struct RescalingDistribution {
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl RescalingDistribution {
    /// Validates and adopts `weights` as-is.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution {
                reason: "no weights given".into(),
            });
        }
        if let Some((i, &w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w <= 0.0)
        {
            return Err(Error::InvalidDistribution {
                reason: format!("weight {w} at index {i} is not strictly positive"),
            });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution {
                reason: format!("weights sum to {total}, not 1"),
            });
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        Ok(Self {
            weights,
            cumulative,
        })
    }

    /// Normalizes strictly positive raw weights to sum to one.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidDistribution {
                reason: "no weights given".into(),
            });
        }
        if let Some((i, &w)) = raw
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w <= 0.0)
        {
            return Err(Error::InvalidDistribution {
                reason: format!("weight {w} at index {i} is not strictly positive"),
            });
        }
        let total: f64 = raw.iter().sum();
        Self::new(raw.into_iter().map(|w| w / total).collect())
    }

    /// Uniform distribution over `n` indices.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n.max(1) as f64; n])
    }

    /// The leverage-score mixture `q_i = l_i / sum_j l_j` (equivalently
    /// `l_i / d` up to roundoff).
    pub fn from_leverage_scores(scores: &[f64]) -> Result<Self> {
        Self::normalized(scores.to_vec())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Draws one index by inverse CDF lookup.
    pub fn draw(&self, rng: &mut RngState) -> usize {
        let u = rng.uniform();
        let pos = self.cumulative.partition_point(|&c| c <= u);
        pos.min(self.weights.len() - 1)
    }
}

/// A sequence of row indices with importance weights, as produced by the
/// rescaled samplers. Repeats are allowed; weights are strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSequence {
    indices: Vec<usize>,
    rescale_weights: Vec<f64>,
}

impl SampleSequence {
    pub fn new(indices: Vec<usize>, rescale_weights: Vec<f64>) -> Result<Self> {
        if indices.len() != rescale_weights.len() {
            return Err(Error::ShapeMismatch {
                reason: format!(
                    "{} indices vs {} rescale weights",
                    indices.len(),
                    rescale_weights.len()
                ),
            });
        }
        if let Some(&w) = rescale_weights
            .iter()
            .find(|w| !w.is_finite() || **w <= 0.0)
        {
            return Err(Error::InvalidDistribution {
                reason: format!("rescale weight {w} is not strictly positive"),
            });
        }
        Ok(Self {
            indices,
            rescale_weights,
        })
    }

    /// Number of draws in the sequence.
    pub fn k(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn rescale_weights(&self) -> &[f64] {
        &self.rescale_weights
    }

    /// Weighted Gram matrix `sum_j w_j x_{i_j} x_{i_j}^T` of the sequence.
    pub fn weighted_gram(&self, x: &Matrix) -> Result<Matrix> {
        linalg::weighted_gram(x, &self.indices, &self.rescale_weights)
    }
}

/// A set of distinct row indices, stored sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetSample {
    indices: Vec<usize>,
}

impl SubsetSample {
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSize {
                reason: "subset indices must be distinct".into(),
            });
        }
        Ok(Self { indices })
    }

    /// Number of rows in the subset.
    pub fn k(&self) -> usize {
        self.indices.len()
    }

    /// Indices in ascending order.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}
