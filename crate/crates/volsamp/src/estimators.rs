//! Least-squares estimators over full data, row subsets, and weighted row
//! sequences.
//!
//! The quantity of interest everywhere is the total loss on the full data,
//! `L(w) = ||X w - y||^2`, reported both raw and as a ratio to the optimum
//! `L(w*)`. Subsampled estimators solve only on the sampled rows: subsets
//! solve an unweighted system, sequences a weighted one (via row scaling by
//! the square root of each rescale weight). Sampled rows that fail to span
//! the column space yield the minimum-norm solution rather than an error,
//! since i.i.d. samplers legitimately produce such draws.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{
    find_zero_row, gram_factorize, leverage_scores_with, min_norm_lstsq, GramFactorization, Matrix,
    Vector,
};
use crate::sampling::{SampleSequence, SubsetSample};

/// A least-squares instance: a full-column-rank design matrix with one
/// response per row. Construction validates shape, finiteness, the absence
/// of zero rows, and full rank; the optimum solution is computed once on
/// first use.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    x: Matrix,
    y: Vector,
    fact: GramFactorization,
    optimum: OnceLock<(Vector, f64)>,
}

impl RegressionProblem {
    pub fn new(x: Matrix, y: Vector) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::ShapeMismatch {
                reason: format!("{} rows but {} responses", x.nrows(), y.len()),
            });
        }
        if let Some(bad) = x.iter().chain(y.iter()).find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("value {bad} in the problem data"),
            });
        }
        if let Some(row) = find_zero_row(&x) {
            return Err(Error::ZeroRow { row });
        }
        let fact = gram_factorize(&x)?;
        Ok(Self {
            x,
            y,
            fact,
            optimum: OnceLock::new(),
        })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &Vector {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn factorization(&self) -> &GramFactorization {
        &self.fact
    }

    /// Leverage scores of the design matrix.
    pub fn leverage_scores(&self) -> Vec<f64> {
        leverage_scores_with(&self.x, &self.fact).expect("zero rows were rejected at construction")
    }

    fn optimum(&self) -> &(Vector, f64) {
        self.optimum.get_or_init(|| {
            let w =
                min_norm_lstsq(&self.x, &self.y).expect("shapes were validated at construction");
            let loss = total_loss(self, &w);
            (w, loss)
        })
    }

    /// The least-squares optimum `w* = argmin ||X w - y||^2`.
    pub fn optimum_weights(&self) -> &Vector {
        &self.optimum().0
    }

    /// `L(w*)`, the smallest attainable total loss.
    pub fn optimum_loss(&self) -> f64 {
        self.optimum().1
    }

    /// Absolute floor below which losses are indistinguishable from zero.
    fn loss_floor(&self) -> f64 {
        1e-12 * (1.0 + self.y.norm_squared())
    }

    /// True when the optimum loss is numerically zero, making loss ratios
    /// meaningless.
    pub fn is_degenerate(&self) -> bool {
        self.optimum_loss() <= self.loss_floor()
    }

    fn loss_ratio_for(&self, loss: f64) -> f64 {
        let opt = self.optimum_loss();
        if opt <= self.loss_floor() {
            if loss <= self.loss_floor() {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            (loss / opt).max(1.0)
        }
    }
}

/// An estimator's solution together with its full-data loss.
#[derive(Debug, Clone)]
pub struct EstimatorResult {
    pub weights: Vector,
    /// `L(weights)` on the full data.
    pub loss: f64,
    /// `loss / L(w*)`, at least 1.
    pub loss_ratio: f64,
}

/// Total loss `||X w - y||^2` over all rows.
pub fn total_loss(p: &RegressionProblem, w: &Vector) -> f64 {
    (&p.x * w - &p.y).norm_squared()
}

/// Solves the full problem exactly.
pub fn full_least_squares(p: &RegressionProblem) -> EstimatorResult {
    let (w, loss) = p.optimum().clone();
    let loss_ratio = p.loss_ratio_for(loss);
    EstimatorResult {
        weights: w,
        loss,
        loss_ratio,
    }
}

/// Unweighted least squares on the rows of `s`.
pub fn subset_estimator(p: &RegressionProblem, s: &SubsetSample) -> Result<EstimatorResult> {
    solve_on_rows(p, s.indices(), None)
}

/// Weighted least squares on the rows of `pi`, weighting each drawn row by
/// its rescale weight. At `k = d` with spanning rows the solution
/// interpolates and is independent of the weights.
pub fn rescaled_estimator(p: &RegressionProblem, pi: &SampleSequence) -> Result<EstimatorResult> {
    solve_on_rows(p, pi.indices(), Some(pi.rescale_weights()))
}

fn solve_on_rows(
    p: &RegressionProblem,
    indices: &[usize],
    weights: Option<&[f64]>,
) -> Result<EstimatorResult> {
    let (n, d) = p.x.shape();
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            rows: n,
        });
    }
    let k = indices.len();
    let mut a = Matrix::zeros(k, d);
    let mut b = Vector::zeros(k);
    for (t, &i) in indices.iter().enumerate() {
        let scale = weights.map_or(1.0, |w| w[t].sqrt());
        for c in 0..d {
            a[(t, c)] = p.x[(i, c)] * scale;
        }
        b[t] = p.y[i] * scale;
    }
    let w = min_norm_lstsq(&a, &b)?;
    let loss = total_loss(p, &w);
    let loss_ratio = p.loss_ratio_for(loss);
    Ok(EstimatorResult {
        weights: w,
        loss,
        loss_ratio,
    })
}
