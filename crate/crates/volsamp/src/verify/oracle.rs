//! Exhaustively enumerated reference distributions.
//!
//! These oracles compute sampling laws from first principles: raw
//! determinant weights per outcome, normalized by their enumerated sum. They
//! deliberately avoid the library's pmf functions and log-space determinant
//! path, so a check comparing an implementation against an oracle cannot
//! pass through a shared bug. Expectations are plain weighted sums over the
//! full support; the engine's own sanity condition is that the enumerated
//! weights normalize (checked by every caller through [`total_weight`]).

use crate::enumerate::{sequence_count, sequences, subsets};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::sampling::RescalingDistribution;

/// Largest support an oracle will enumerate.
pub const ORACLE_CAP: u128 = 1_000_000;

/// The rescaled sampling law over `[n]^k`, enumerated outcome by outcome.
pub struct SequenceOracle {
    n: usize,
    k: usize,
    /// Probability of each sequence, indexed by lexicographic rank.
    probs: Vec<f64>,
    /// Sum of raw determinant weights before normalization.
    raw_total: f64,
}

impl SequenceOracle {
    /// Enumerates `Pr(π) ∝ det(X^T Q_π X) prod_t q_{π_t}` by direct (LU)
    /// determinants.
    pub fn new(x: &Matrix, q: &RescalingDistribution, k: usize) -> Result<Self> {
        let (n, d) = x.shape();
        let support = sequence_count(n, k).unwrap_or(u128::MAX);
        if support > ORACLE_CAP {
            return Err(Error::TooLarge {
                support,
                cap: ORACLE_CAP,
            });
        }
        let mut raw = Vec::with_capacity(support as usize);
        let mut raw_total = 0.0;
        for pi in sequences(n, k) {
            let mut weighted = Matrix::zeros(d, d);
            let mut q_prod = 1.0;
            for &i in &pi {
                let w = 1.0 / q.weight(i);
                q_prod *= q.weight(i);
                for a in 0..d {
                    for b in 0..d {
                        weighted[(a, b)] += w * x[(i, a)] * x[(i, b)];
                    }
                }
            }
            let det = weighted.determinant().max(0.0);
            let weight = det * q_prod;
            raw_total += weight;
            raw.push(weight);
        }
        if raw_total <= 0.0 {
            return Err(Error::InvalidDistribution {
                reason: "no sequence has positive determinant weight".into(),
            });
        }
        let probs = raw.into_iter().map(|w| w / raw_total).collect();
        Ok(Self {
            n,
            k,
            probs,
            raw_total,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Sum of the unnormalized determinant weights (the empirical
    /// normalizing constant).
    pub fn total_weight(&self) -> f64 {
        self.raw_total
    }

    /// Probability of the sequence with the given lexicographic rank.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Iterates `(sequence, probability)` over the whole support.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        sequences(self.n, self.k).zip(self.probs.iter().copied())
    }

    /// `sum_π Pr(π) f(π)`.
    pub fn expect_scalar(&self, mut f: impl FnMut(&[usize]) -> f64) -> f64 {
        self.iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(pi, p)| p * f(&pi))
            .sum()
    }

    /// Entrywise `sum_π Pr(π) f(π)` for matrix statistics.
    pub fn expect_matrix(
        &self,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(&[usize]) -> Matrix,
    ) -> Matrix {
        let mut acc = Matrix::zeros(rows, cols);
        for (pi, p) in self.iter() {
            if p > 0.0 {
                acc += f(&pi).scale(p);
            }
        }
        acc
    }
}

/// The volume sampling law over size-k subsets, enumerated directly.
pub struct SubsetOracle {
    outcomes: Vec<Vec<usize>>,
    probs: Vec<f64>,
    raw_total: f64,
}

impl SubsetOracle {
    /// Enumerates `Pr(S) ∝ det(X_S^T X_S)` by direct determinants.
    pub fn new(x: &Matrix, k: usize) -> Result<Self> {
        let (n, d) = x.shape();
        if k < d || k > n {
            return Err(Error::InvalidSize {
                reason: format!("subset size k={k} outside [{d}, {n}]"),
            });
        }
        let mut outcomes = Vec::new();
        let mut raw = Vec::new();
        let mut raw_total = 0.0;
        for s in subsets(n, k) {
            let mut gram = Matrix::zeros(d, d);
            for &i in &s {
                for a in 0..d {
                    for b in 0..d {
                        gram[(a, b)] += x[(i, a)] * x[(i, b)];
                    }
                }
            }
            let det = gram.determinant().max(0.0);
            raw_total += det;
            raw.push(det);
            outcomes.push(s);
        }
        if raw_total <= 0.0 {
            return Err(Error::InvalidDistribution {
                reason: "no subset spans positive volume".into(),
            });
        }
        let probs = raw.into_iter().map(|w| w / raw_total).collect();
        Ok(Self {
            outcomes,
            probs,
            raw_total,
        })
    }

    pub fn total_weight(&self) -> f64 {
        self.raw_total
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn outcomes(&self) -> &[Vec<usize>] {
        &self.outcomes
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        self.outcomes
            .iter()
            .map(|s| s.as_slice())
            .zip(self.probs.iter().copied())
    }

    /// Lexicographic slot of a sorted subset, for counting sampler output.
    pub fn position_of(&self, subset: &[usize]) -> Option<usize> {
        self.outcomes
            .binary_search_by(|probe| probe.as_slice().cmp(subset))
            .ok()
    }

    pub fn expect_scalar(&self, mut f: impl FnMut(&[usize]) -> f64) -> f64 {
        self.iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(s, p)| p * f(s))
            .sum()
    }

    pub fn expect_matrix(
        &self,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(&[usize]) -> Matrix,
    ) -> Matrix {
        let mut acc = Matrix::zeros(rows, cols);
        for (s, p) in self.iter() {
            if p > 0.0 {
                acc += f(s).scale(p);
            }
        }
        acc
    }
}

/// Lexicographic rank of a sequence, for counting sampler output.
pub fn sequence_rank(pi: &[usize], n: usize) -> usize {
    pi.iter().fold(0usize, |acc, &i| acc * n + i)
}
