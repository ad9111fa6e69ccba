//! Checks that the samplers and estimators satisfy their defining laws.
//!
//! Two families:
//!
//! - identity checks enumerate a whole sampling law through an independent
//!   oracle ([`SequenceOracle`], [`SubsetOracle`]) and compare exact
//!   expectations against closed forms, to tolerance `1e-8`;
//! - statistical checks run the actual samplers and test frequencies,
//!   moments and tail bounds at pinned significance levels.
//!
//! Every check returns a [`CheckReport`] so callers (CLI, integration
//! tests) can print uniform pass/fail lines and serialize results.

mod identities;
mod oracle;
mod statistical;

pub use identities::{
    check_cauchy_binet, check_composition, check_marginal_expectation, check_pairwise_covariance,
    check_rescaled_normalization, check_square_inverse_bound, check_square_inverse_equality,
    check_unbiased_gram, check_unbiasedness, check_unbiasedness_volume, check_volume_marginal,
    check_volume_normalization, IDENTITY_TOL,
};
pub use oracle::{sequence_rank, SequenceOracle, SubsetOracle, ORACLE_CAP};
pub use statistical::{
    check_acceptance_rate, check_bruteforce_sampler_gof, check_coupled, check_coupled_tail,
    check_fast_matches_pmf, check_fast_sampler, check_leveraged_sampler_gof, check_loss_bound,
    check_lower_bound, check_matrix_multiplication, check_subspace_embedding,
    check_volume_sampler_gof, chi_square_gof, expected_coupled_rejections, k_embed,
    loss_bound_size, total_variation, GoodnessOfFit, CHI_SQUARE_SIGNIFICANCE, EMBED_FAILURE_RATE,
    LOSS_BOUND_CONSTANT, MIN_EXPECTED_CELL, STDERR_SLACK,
};

use crate::error::{Error, Result};
use crate::estimators::RegressionProblem;
use crate::linalg::{orthogonalize, Matrix, Vector};
use crate::rng::{derive_seed, label, RngState};
use crate::sampling::{FastSamplerOptions, RescalingDistribution};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;

/// Outcome of a single check: a named comparison with the numbers that
/// decided it.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// The quantity the check measured.
    pub observed: f64,
    /// The reference value or bound it was held against.
    pub expected: f64,
    /// Slack applied to the comparison.
    pub tolerance: f64,
    /// Instance description and auxiliary numbers.
    pub detail: String,
}

impl CheckReport {
    /// Passes when `|observed - expected| <= tolerance`.
    pub fn close_abs(
        name: impl Into<String>,
        observed: f64,
        expected: f64,
        tolerance: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            passed: (observed - expected).abs() <= tolerance,
            observed,
            expected,
            tolerance,
            detail: detail.into(),
        }
    }

    /// Passes when `|observed - expected| <= tolerance * max(1, |expected|)`.
    pub fn close_rel(
        name: impl Into<String>,
        observed: f64,
        expected: f64,
        tolerance: f64,
        detail: impl Into<String>,
    ) -> Self {
        let scale = expected.abs().max(1.0);
        Self {
            name: name.into(),
            passed: (observed - expected).abs() <= tolerance * scale,
            observed,
            expected,
            tolerance,
            detail: detail.into(),
        }
    }

    /// Passes when `observed <= limit + slack`.
    pub fn at_most(
        name: impl Into<String>,
        observed: f64,
        limit: f64,
        slack: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            passed: observed <= limit + slack,
            observed,
            expected: limit,
            tolerance: slack,
            detail: detail.into(),
        }
    }

    /// Passes when `observed >= limit - slack`.
    pub fn at_least(
        name: impl Into<String>,
        observed: f64,
        limit: f64,
        slack: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            passed: observed >= limit - slack,
            observed,
            expected: limit,
            tolerance: slack,
            detail: detail.into(),
        }
    }

    /// One human-readable line, stable enough to grep in logs.
    pub fn summary_line(&self) -> String {
        format!(
            "[{}] {}: observed {:.6e}, expected {:.6e}, tolerance {:.1e} ({})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.observed,
            self.expected,
            self.tolerance,
            self.detail,
        )
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.summary_line())
    }
}

/// Which family of checks to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Identities,
    Statistical,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identities" => Ok(Self::Identities),
            "statistical" => Ok(Self::Statistical),
            "all" => Ok(Self::All),
            other => Err(Error::InvalidConfig {
                reason: format!("unknown suite '{other}', expected identities|statistical|all"),
            }),
        }
    }
}

/// Runs the requested suite. `seed` drives the statistical checks (the
/// identity checks are deterministic); `jobs == 0` uses the default rayon
/// pool, otherwise a dedicated pool with that many threads.
pub fn run_suite(suite: Suite, seed: u64, jobs: usize) -> Result<Vec<CheckReport>> {
    let run = || -> Result<Vec<CheckReport>> {
        let mut reports = Vec::new();
        if matches!(suite, Suite::Identities | Suite::All) {
            reports.extend(identity_suite()?);
        }
        if matches!(suite, Suite::Statistical | Suite::All) {
            reports.extend(statistical_suite(seed)?);
        }
        Ok(reports)
    };
    if jobs == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidConfig {
                reason: format!("cannot build a {jobs}-thread pool: {e}"),
            })?
            .install(run)
    }
}

fn ones2() -> Matrix {
    Matrix::from_row_slice(2, 1, &[1.0, 1.0])
}

fn pair21() -> Matrix {
    Matrix::from_row_slice(2, 1, &[1.0, -2.0])
}

fn line3() -> Matrix {
    Matrix::from_row_slice(3, 1, &[1.0, -2.0, 0.5])
}

fn plane32() -> Matrix {
    Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0])
}

/// 4x2 design in general position: every pair of rows is independent, so
/// the expected-inverse identity holds with equality.
fn plane42() -> Matrix {
    Matrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, -1.0])
}

fn q_pair() -> Result<RescalingDistribution> {
    RescalingDistribution::new(vec![0.3, 0.7])
}

fn q_line() -> Result<RescalingDistribution> {
    RescalingDistribution::new(vec![0.2, 0.3, 0.5])
}

fn q_skew4() -> Result<RescalingDistribution> {
    RescalingDistribution::normalized(vec![1.0, 2.0, 3.0, 4.0])
}

fn leverage_mixture(x: &Matrix) -> Result<RescalingDistribution> {
    let scores = crate::linalg::leverage_scores(x)?;
    RescalingDistribution::from_leverage_scores(&scores)
}

fn prob_pair() -> Result<RegressionProblem> {
    RegressionProblem::new(pair21(), Vector::from_row_slice(&[1.0, 0.5]))
}

fn prob32() -> Result<RegressionProblem> {
    RegressionProblem::new(plane32(), Vector::from_row_slice(&[1.0, 2.0, 0.5]))
}

fn prob42() -> Result<RegressionProblem> {
    RegressionProblem::new(plane42(), Vector::from_row_slice(&[1.0, -0.5, 2.0, 0.3]))
}

/// All enumeration-based checks on a fixed family of small instances.
pub fn identity_suite() -> Result<Vec<CheckReport>> {
    let uniform2 = RescalingDistribution::uniform(2)?;
    let uniform3 = RescalingDistribution::uniform(3)?;
    let q2 = q_pair()?;
    let q3 = q_line()?;
    let q4 = q_skew4()?;
    let lev42 = leverage_mixture(&plane42())?;
    let mut reports = vec![
        check_cauchy_binet(&ones2(), &uniform2, 2)?,
        check_cauchy_binet(&pair21(), &q2, 1)?,
        check_cauchy_binet(&pair21(), &q2, 3)?,
        // k > n exercises the sequence law beyond subset territory.
        check_cauchy_binet(&pair21(), &q2, 5)?,
        check_cauchy_binet(&plane32(), &uniform3, 2)?,
        check_cauchy_binet(&plane32(), &uniform3, 4)?,
        check_cauchy_binet(&plane42(), &q4, 3)?,
        check_rescaled_normalization(&pair21(), &q2, 3)?,
        check_rescaled_normalization(&plane32(), &uniform3, 3)?,
        check_volume_normalization(&line3(), 2)?,
        check_volume_normalization(&plane42(), 2)?,
        check_volume_normalization(&plane42(), 3)?,
        check_volume_marginal(&plane32(), 2)?,
        check_volume_marginal(&plane42(), 3)?,
        check_marginal_expectation(&pair21(), &q2, 3)?,
        check_marginal_expectation(&plane32(), &uniform3, 2)?,
        check_marginal_expectation(&plane42(), &lev42, 3)?,
        check_pairwise_covariance(&ones2(), &uniform2, 2)?,
        check_pairwise_covariance(&pair21(), &q2, 2)?,
        check_pairwise_covariance(&plane32(), &uniform3, 3)?,
        check_unbiased_gram(&plane32(), &q3, 3)?,
        check_unbiased_gram(&plane42(), &q4, 2)?,
    ];
    let p2 = prob_pair()?;
    let p32 = prob32()?;
    let p42 = prob42()?;
    reports.extend([
        check_unbiasedness(&p2, &q2, 1)?,
        check_unbiasedness(&p2, &q2, 2)?,
        check_unbiasedness(&p42, &lev42, 2)?,
        check_unbiasedness(&p42, &lev42, 3)?,
        check_unbiasedness(&p32, &uniform3, 3)?,
        check_unbiasedness_volume(&p32, 2)?,
        check_unbiasedness_volume(&p42, 2)?,
        check_unbiasedness_volume(&p42, 3)?,
        check_square_inverse_bound(&pair21(), &q2, 1)?,
        check_square_inverse_bound(&pair21(), &q2, 2)?,
        check_square_inverse_bound(&pair21(), &q2, 4)?,
        check_square_inverse_bound(&plane32(), &uniform3, 2)?,
        check_square_inverse_bound(&plane42(), &lev42, 2)?,
        check_square_inverse_bound(&plane42(), &lev42, 3)?,
        check_square_inverse_equality(&ones2(), 1)?,
        check_square_inverse_equality(&plane42(), 2)?,
        check_square_inverse_equality(&plane42(), 3)?,
        check_square_inverse_equality(&plane42(), 4)?,
        check_composition(&line3(), &q3, 3, 2)?,
        check_composition(&plane32(), &uniform3, 4, 2)?,
        check_composition(&plane32(), &uniform3, 4, 3)?,
    ]);
    Ok(reports)
}

/// Seeded Monte-Carlo checks against the real samplers. Each task derives
/// its own stream, so rayon scheduling cannot change any outcome.
pub fn statistical_suite(seed: u64) -> Result<Vec<CheckReport>> {
    type Task = Box<dyn Fn(&mut RngState) -> Result<Vec<CheckReport>> + Send + Sync>;
    let mut tasks: Vec<(&'static str, Task)> = Vec::new();

    tasks.push((
        "volume_gof",
        Box::new(|rng| Ok(vec![check_volume_sampler_gof(&plane32(), 2, 20_000, rng)?])),
    ));
    tasks.push((
        "leveraged_gof",
        Box::new(|rng| {
            Ok(vec![check_leveraged_sampler_gof(
                &plane42(),
                2,
                20_000,
                rng,
            )?])
        }),
    ));
    tasks.push((
        "bruteforce_gof",
        Box::new(|rng| {
            Ok(vec![check_bruteforce_sampler_gof(
                &pair21(),
                &q_pair()?,
                2,
                20_000,
                rng,
            )?])
        }),
    ));
    tasks.push((
        "acceptance_plane",
        Box::new(|rng| check_acceptance_rate(&plane42(), 2, 400, rng)),
    ));
    tasks.push((
        "acceptance_line",
        Box::new(|rng| check_acceptance_rate(&line3(), 2, 200, rng)),
    ));
    tasks.push((
        "fast_exact",
        Box::new(|rng| {
            check_fast_sampler(
                &plane42(),
                2,
                300,
                FastSamplerOptions::for_epsilon(0.0),
                rng,
            )
        }),
    ));
    tasks.push((
        "fast_sketched",
        Box::new(|rng| {
            check_fast_sampler(
                &plane42(),
                2,
                100,
                FastSamplerOptions::for_epsilon(0.03),
                rng,
            )
        }),
    ));
    tasks.push((
        "fast_tv",
        Box::new(|rng| Ok(vec![check_fast_matches_pmf(&plane32(), 2, 50_000, rng)?])),
    ));
    tasks.push((
        "matrix_mult",
        Box::new(|rng| {
            let u = orthogonalize(&gaussian_matrix(32, 2, rng))?;
            let r = gaussian_vector(32, rng);
            Ok(vec![check_matrix_multiplication(&u, &r, 8, 400, rng)?])
        }),
    ));
    tasks.push((
        "embedding",
        Box::new(|rng| {
            let u = orthogonalize(&gaussian_matrix(64, 2, rng))?;
            Ok(vec![check_subspace_embedding(&u, k_embed(2), 200, rng)?])
        }),
    ));
    tasks.push((
        "loss_bound",
        Box::new(|rng| {
            let x = gaussian_matrix(60, 2, rng);
            let y = gaussian_vector(60, rng);
            let p = RegressionProblem::new(x, y)?;
            Ok(vec![check_loss_bound(&p, 0.5, 300, rng)?])
        }),
    ));
    tasks.push((
        "lower_bound",
        Box::new(|rng| check_lower_bound(100, 10, 50, 1_000, rng)),
    ));
    tasks.push((
        "coupled_small",
        Box::new(|rng| {
            let x = Matrix::from_row_slice(4, 1, &[1.0, -2.0, 0.5, 3.0]);
            check_coupled(&x, 2, 20_000, rng)
        }),
    ));
    tasks.push((
        "coupled_wide",
        Box::new(|rng| {
            let x = gaussian_matrix(12, 2, rng);
            check_coupled(&x, 4, 5_000, rng)
        }),
    ));
    tasks.push((
        "coupled_tail",
        Box::new(|rng| {
            let x = gaussian_matrix(30, 1, rng);
            Ok(vec![check_coupled_tail(&x, 2, 5_000, 4.0, rng)?])
        }),
    ));

    let nested: Vec<Result<Vec<CheckReport>>> = tasks
        .par_iter()
        .map(|(name, task)| {
            let mut rng = RngState::new(derive_seed(seed, &[label(name)]));
            task(&mut rng)
        })
        .collect();
    let mut reports = Vec::new();
    for batch in nested {
        reports.extend(batch?);
    }
    Ok(reports)
}

pub(crate) fn gaussian_matrix(rows: usize, cols: usize, rng: &mut RngState) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub(crate) fn gaussian_vector(len: usize, rng: &mut RngState) -> Vector {
    Vector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_constructors() {
        assert!(CheckReport::close_abs("a", 1.0, 1.0 + 1e-9, 1e-8, "").passed);
        assert!(!CheckReport::close_abs("a", 1.0, 1.1, 1e-8, "").passed);
        assert!(CheckReport::close_rel("a", 1000.0, 1000.0 + 1e-6, 1e-8, "").passed);
        assert!(CheckReport::at_most("a", 0.9, 1.0, 0.0, "").passed);
        assert!(!CheckReport::at_most("a", 1.1, 1.0, 0.05, "").passed);
        assert!(CheckReport::at_least("a", 0.76, 0.75, 0.0, "").passed);
        assert!(!CheckReport::at_least("a", 0.70, 0.75, 0.01, "").passed);
    }

    #[test]
    fn summary_line_marks_outcome() {
        let ok = CheckReport::at_most("bound", 0.5, 1.0, 0.0, "toy");
        assert!(ok.summary_line().starts_with("[PASS] bound:"));
        let bad = CheckReport::at_most("bound", 2.0, 1.0, 0.0, "toy");
        assert!(bad.summary_line().starts_with("[FAIL] bound:"));
    }

    #[test]
    fn suite_parses_from_str() {
        assert_eq!("identities".parse::<Suite>().unwrap(), Suite::Identities);
        assert_eq!("statistical".parse::<Suite>().unwrap(), Suite::Statistical);
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn identity_suite_passes() {
        let reports = identity_suite().unwrap();
        assert!(reports.len() > 30);
        for r in &reports {
            assert!(r.passed, "{}", r.summary_line());
        }
    }

    #[test]
    fn suite_runner_is_deterministic() {
        let a = run_suite(Suite::Statistical, 7, 2).unwrap();
        let b = run_suite(Suite::Statistical, 7, 1).unwrap();
        assert_eq!(a.len(), b.len());
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.name, rb.name);
            assert_eq!(ra.observed.to_bits(), rb.observed.to_bits());
            assert!(ra.passed, "{}", ra.summary_line());
        }
    }
}
