//! Exact determinantal identities, verified by full enumeration.
//!
//! Every check compares an oracle expectation (computed from raw
//! determinants, see [`super::oracle`]) against a closed form. Deviations
//! are pure floating-point noise, so the default tolerance is tight.

use std::collections::BTreeMap;

use crate::enumerate::{falling_factorial, sequences, subsets};
use crate::error::{Error, Result};
use crate::estimators::{rescaled_estimator, subset_estimator, RegressionProblem};
use crate::linalg::{
    gram_factorize, leverage_scores, min_eigenvalue_sym, weighted_gram, Matrix, Vector,
};
use crate::sampling::{
    rescaled_pmf, volume_marginal, volume_sample_pmf, RescalingDistribution, SampleSequence,
    SubsetSample,
};

use super::oracle::{SequenceOracle, SubsetOracle};
use super::CheckReport;

/// Absolute tolerance for enumerated identities.
pub const IDENTITY_TOL: f64 = 1e-8;

fn tag(n: usize, d: usize, k: usize) -> String {
    format!("n={n} d={d} k={k}")
}

/// Sum of determinant weights over all k-sequences equals
/// `k (k-1) ... (k-d+1) det(X^T X)`, for any rescaling q and any k,
/// including k > n.
pub fn check_cauchy_binet(x: &Matrix, q: &RescalingDistribution, k: usize) -> Result<CheckReport> {
    let (n, d) = x.shape();
    let oracle = SequenceOracle::new(x, q, k)?;
    let expected = falling_factorial(k, d) * (x.transpose() * x).determinant();
    Ok(CheckReport::close_rel(
        format!("cauchy_binet[{}]", tag(n, d, k)),
        oracle.total_weight(),
        expected,
        IDENTITY_TOL,
        "enumerated weight sum vs falling-factorial normalizer",
    ))
}

/// The implementation's sequence pmf sums to one over the whole support.
pub fn check_rescaled_normalization(
    x: &Matrix,
    q: &RescalingDistribution,
    k: usize,
) -> Result<CheckReport> {
    let (n, d) = x.shape();
    let mut total = 0.0;
    for pi in sequences(n, k) {
        total += rescaled_pmf(x, q, k, &pi)?;
    }
    Ok(CheckReport::close_abs(
        format!("rescaled_pmf_normalization[{}]", tag(n, d, k)),
        total,
        1.0,
        1e-10,
        "sum of rescaled_pmf over all sequences",
    ))
}

/// The implementation's subset pmf sums to one over all k-subsets.
pub fn check_volume_normalization(x: &Matrix, k: usize) -> Result<CheckReport> {
    let (n, d) = x.shape();
    let mut total = 0.0;
    for s in subsets(n, k) {
        total += volume_sample_pmf(x, &SubsetSample::new(s)?)?;
    }
    Ok(CheckReport::close_abs(
        format!("volume_pmf_normalization[{}]", tag(n, d, k)),
        total,
        1.0,
        1e-10,
        "sum of volume_sample_pmf over all subsets",
    ))
}

/// Enumerated inclusion probabilities match the closed-form marginal
/// `Pr(i in S) = 1 - (n-k)/(n-d) (1 - l_i)`.
pub fn check_volume_marginal(x: &Matrix, k: usize) -> Result<CheckReport> {
    let (n, d) = x.shape();
    let oracle = SubsetOracle::new(x, k)?;
    let mut dev: f64 = 0.0;
    for i in 0..n {
        let enumerated = oracle.expect_scalar(|s| s.binary_search(&i).is_ok() as u8 as f64);
        dev = dev.max((enumerated - volume_marginal(x, k, i)?).abs());
    }
    Ok(CheckReport::close_abs(
        format!("volume_marginal[{}]", tag(n, d, k)),
        dev,
        0.0,
        IDENTITY_TOL,
        "max over rows of |enumerated - closed form|",
    ))
}

/// Diagonal expectation `E[(Q_π)_ii] = (k-d) + l_i/q_i` and per-position
/// marginal `Pr(π_t = i) = ((k-d) q_i + l_i)/k`.
pub fn check_marginal_expectation(
    x: &Matrix,
    q: &RescalingDistribution,
    k: usize,
) -> Result<CheckReport> {
    let (n, d) = x.shape();
    let scores = leverage_scores(x)?;
    let oracle = SequenceOracle::new(x, q, k)?;
    let kd = (k - d) as f64;
    let mut dev: f64 = 0.0;
    for (i, &score) in scores.iter().enumerate() {
        let count = oracle.expect_scalar(|pi| pi.iter().filter(|&&t| t == i).count() as f64);
        let diag = count / q.weight(i);
        dev = dev.max((diag - (kd + score / q.weight(i))).abs());
        let formula_pos = (kd * q.weight(i) + score) / k as f64;
        for t in 0..k {
            let pos = oracle.expect_scalar(|pi| (pi[t] == i) as u8 as f64);
            dev = dev.max((pos - formula_pos).abs());
        }
    }
    Ok(CheckReport::close_abs(
        format!("rescaled_marginals[{}]", tag(n, d, k)),
        dev,
        0.0,
        IDENTITY_TOL,
        "max deviation over diagonal expectations and position marginals",
    ))
}

/// Covariance of the rescaling matrix diagonal:
/// `cov[(Q_π)_ii, (Q_π)_jj] = δ_ij E[(Q_π)_ii]/q_i - (k-d) - l_ij^2/(q_i q_j)`
/// with `l_ij = x_i^T (X^T X)^{-1} x_j`.
pub fn check_pairwise_covariance(
    x: &Matrix,
    q: &RescalingDistribution,
    k: usize,
) -> Result<CheckReport> {
    let (n, d) = x.shape();
    let inv = gram_factorize(x)?.inverse().clone();
    let oracle = SequenceOracle::new(x, q, k)?;
    let kd = (k - d) as f64;
    let count = |pi: &[usize], i: usize| pi.iter().filter(|&&t| t == i).count() as f64;
    let diag: Vec<f64> = (0..n)
        .map(|i| oracle.expect_scalar(|pi| count(pi, i)) / q.weight(i))
        .collect();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            let qij = q.weight(i) * q.weight(j);
            let product = oracle.expect_scalar(|pi| count(pi, i) * count(pi, j)) / qij;
            let enumerated = product - diag[i] * diag[j];
            let lij = cross_leverage(x, &inv, i, j);
            let mut formula = -kd - lij * lij / qij;
            if i == j {
                let lii = cross_leverage(x, &inv, i, i);
                formula += (kd + lii / q.weight(i)) / q.weight(i);
            }
            dev = dev.max((enumerated - formula).abs());
        }
    }
    Ok(CheckReport::close_abs(
        format!("rescaled_covariance[{}]", tag(n, d, k)),
        dev,
        0.0,
        IDENTITY_TOL,
        "max deviation over all diagonal pairs",
    ))
}

/// `x_i^T (X^T X)^{-1} x_j`, the off-diagonal of the hat matrix.
fn cross_leverage(x: &Matrix, inv: &Matrix, i: usize, j: usize) -> f64 {
    let d = x.ncols();
    let mut total = 0.0;
    for a in 0..d {
        for b in 0..d {
            total += x[(i, a)] * inv[(a, b)] * x[(j, b)];
        }
    }
    total
}

/// `E[(1/k) X^T Q_π X] = X^T X` exactly when q is the leverage score
/// mixture, and measurably not otherwise.
pub fn check_unbiased_gram(
    x: &Matrix,
    q_other: &RescalingDistribution,
    k: usize,
) -> Result<CheckReport> {
    let (n, d) = x.shape();
    let scores = leverage_scores(x)?;
    let q_lev = RescalingDistribution::from_leverage_scores(&scores)?;
    let deviation = |q: &RescalingDistribution| -> Result<f64> {
        let oracle = SequenceOracle::new(x, q, k)?;
        let mut e = Matrix::zeros(d, d);
        for i in 0..n {
            let diag = oracle.expect_scalar(|pi| pi.iter().filter(|&&t| t == i).count() as f64)
                / q.weight(i);
            for a in 0..d {
                for b in 0..d {
                    e[(a, b)] += diag * x[(i, a)] * x[(i, b)];
                }
            }
        }
        let gram = x.transpose() * x;
        Ok((e.scale(1.0 / k as f64) - gram).amax())
    };
    let dev_lev = deviation(&q_lev)?;
    let dev_other = deviation(q_other)?;
    let mut report = CheckReport::close_abs(
        format!("unbiased_gram_iff_leveraged[{}]", tag(n, d, k)),
        dev_lev,
        0.0,
        IDENTITY_TOL,
        format!("leverage mixture deviation; other mixture deviates by {dev_other:.3e}"),
    );
    // The identity must also fail for the non-leverage mixture, or the
    // check proves nothing about the "only if" direction.
    report.passed = report.passed && dev_other > 1e-6;
    Ok(report)
}

/// `E[w_π*] = w*` for the rescaled estimator, any rescaling q.
pub fn check_unbiasedness(
    p: &RegressionProblem,
    q: &RescalingDistribution,
    k: usize,
) -> Result<CheckReport> {
    let oracle = SequenceOracle::new(p.x(), q, k)?;
    let mut mean = Vector::zeros(p.d());
    for (pi, prob) in oracle.iter() {
        if prob <= 0.0 {
            continue;
        }
        let weights = pi.iter().map(|&i| 1.0 / q.weight(i)).collect();
        let seq = SampleSequence::new(pi, weights)?;
        mean += rescaled_estimator(p, &seq)?.weights.scale(prob);
    }
    let dev = (mean - p.optimum_weights()).amax();
    Ok(CheckReport::close_abs(
        format!("rescaled_unbiasedness[{}]", tag(p.n(), p.d(), k)),
        dev,
        0.0,
        IDENTITY_TOL,
        "max coordinate of |E[w] - w*|",
    ))
}

/// `E[w_S*] = w*` for the plain subset estimator under volume sampling.
pub fn check_unbiasedness_volume(p: &RegressionProblem, k: usize) -> Result<CheckReport> {
    let oracle = SubsetOracle::new(p.x(), k)?;
    let mut mean = Vector::zeros(p.d());
    for (s, prob) in oracle.iter() {
        if prob <= 0.0 {
            continue;
        }
        let sample = SubsetSample::new(s.to_vec())?;
        mean += subset_estimator(p, &sample)?.weights.scale(prob);
    }
    let dev = (mean - p.optimum_weights()).amax();
    Ok(CheckReport::close_abs(
        format!("volume_unbiasedness[{}]", tag(p.n(), p.d(), k)),
        dev,
        0.0,
        IDENTITY_TOL,
        "max coordinate of |E[w] - w*|",
    ))
}

/// `E[(X^T Q_π X)^{-1}] ⪯ (X^T X)^{-1} / (k-d+1)` in the PSD order.
pub fn check_square_inverse_bound(
    x: &Matrix,
    q: &RescalingDistribution,
    k: usize,
) -> Result<CheckReport> {
    let (n, d) = x.shape();
    let fact = gram_factorize(x)?;
    let oracle = SequenceOracle::new(x, q, k)?;
    let mut e_inv = Matrix::zeros(d, d);
    let mut singular_support = false;
    for (pi, prob) in oracle.iter() {
        if prob <= 0.0 {
            continue;
        }
        let weights: Vec<f64> = pi.iter().map(|&i| 1.0 / q.weight(i)).collect();
        let w = weighted_gram(x, &pi, &weights)?;
        match w.try_inverse() {
            Some(inv) => e_inv += inv.scale(prob),
            None => singular_support = true,
        }
    }
    let bound = fact.inverse().scale(1.0 / (k - d + 1) as f64);
    let min_eig = min_eigenvalue_sym(&(bound - e_inv))?;
    let mut report = CheckReport::at_least(
        format!("square_inverse_bound[{}]", tag(n, d, k)),
        min_eig,
        0.0,
        IDENTITY_TOL,
        "min eigenvalue of bound - E[inverse]",
    );
    report.passed = report.passed && !singular_support;
    Ok(report)
}

/// Under volume sampling of a design in general position the bound is an
/// identity: `E[(X_S^T X_S)^{-1}] = (n-d+1)/(k-d+1) (X^T X)^{-1}`.
pub fn check_square_inverse_equality(x: &Matrix, k: usize) -> Result<CheckReport> {
    let (n, d) = x.shape();
    let fact = gram_factorize(x)?;
    let oracle = SubsetOracle::new(x, k)?;
    let mut e_inv = Matrix::zeros(d, d);
    for (s, prob) in oracle.iter() {
        // A zero-probability subset means some k rows do not span, which
        // breaks the general-position precondition of the identity.
        let gram = weighted_gram(x, s, &vec![1.0; s.len()])?;
        let inv = match gram.try_inverse() {
            Some(inv) if prob > 0.0 => inv,
            _ => {
                return Err(Error::RankDeficient {
                    ratio: 0.0,
                    hint: "general-position equality needs every k-subset to span",
                })
            }
        };
        e_inv += inv.scale(prob);
    }
    let factor = (n - d + 1) as f64 / (k - d + 1) as f64;
    let dev = (e_inv - fact.inverse().scale(factor)).amax();
    Ok(CheckReport::close_abs(
        format!("square_inverse_equality[{}]", tag(n, d, k)),
        dev,
        0.0,
        IDENTITY_TOL,
        "max entry of |E[inverse] - scaled inverse Gram|",
    ))
}

/// Sampling an s-sequence from the rescaled law and reducing it to k rows
/// by volume sampling the rescaled rows lands back in the rescaled law.
/// Enumerates the full two-stage process and compares against the direct
/// k-sequence pmf.
pub fn check_composition(
    x: &Matrix,
    q: &RescalingDistribution,
    s: usize,
    k: usize,
) -> Result<CheckReport> {
    let (n, d) = x.shape();
    if k > s {
        return Err(Error::InvalidSize {
            reason: format!("composition needs k={k} <= s={s}"),
        });
    }
    let stage1 = SequenceOracle::new(x, q, s)?;
    let mut law: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (pi, prob) in stage1.iter() {
        if prob <= 0.0 {
            continue;
        }
        let mut rescaled = Matrix::zeros(s, d);
        for (t, &i) in pi.iter().enumerate() {
            let scale = 1.0 / q.weight(i).sqrt();
            for c in 0..d {
                rescaled[(t, c)] = x[(i, c)] * scale;
            }
        }
        let mut outputs = Vec::new();
        let mut dets = Vec::new();
        let mut total = 0.0;
        for positions in subsets(s, k) {
            let mut gram = Matrix::zeros(d, d);
            for &t in &positions {
                for a in 0..d {
                    for b in 0..d {
                        gram[(a, b)] += rescaled[(t, a)] * rescaled[(t, b)];
                    }
                }
            }
            let det = gram.determinant().max(0.0);
            total += det;
            dets.push(det);
            outputs.push(positions.iter().map(|&t| pi[t]).collect::<Vec<usize>>());
        }
        // A positive-probability s-sequence spans, so some k-subset of its
        // rows spans too.
        debug_assert!(total > 0.0);
        for (out, det) in outputs.into_iter().zip(dets) {
            if det > 0.0 {
                *law.entry(out).or_insert(0.0) += prob * det / total;
            }
        }
    }
    let mut dev: f64 = 0.0;
    let mut mass = 0.0;
    for pi in sequences(n, k) {
        let direct = rescaled_pmf(x, q, k, &pi)?;
        let composed = law.get(&pi).copied().unwrap_or(0.0);
        mass += composed;
        dev = dev.max((composed - direct).abs());
    }
    let mut report = CheckReport::close_abs(
        format!("composition_closure[{} s={s}]", tag(n, d, k)),
        dev,
        0.0,
        IDENTITY_TOL,
        format!("max pmf deviation; composed mass {mass:.12}"),
    );
    report.passed = report.passed && (mass - 1.0).abs() <= 1e-9;
    Ok(report)
}
