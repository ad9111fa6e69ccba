//! Monte-Carlo checks against the real samplers.
//!
//! Frequency tests use a chi-square statistic at a fixed significance
//! level; moment and tail tests allow three standard errors of slack, so a
//! correct implementation fails any single check with negligible
//! probability under the pinned seeds.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::enumerate::{falling_factorial, sequence_count, sequences, subsets};
use crate::error::{Error, Result};
use crate::estimators::{rescaled_estimator, subset_estimator, RegressionProblem};
use crate::experiments::{lower_bound_instance, solve_gamma_for_loss};
use crate::linalg::{leverage_scores, min_eigenvalue_sym, Matrix, Vector};
use crate::rng::RngState;
use crate::sampling::{
    coupled_sample, leveraged_volume_sample, leveraged_volume_sample_traced, proposal_count,
    rescaled_pmf, rescaled_sample_bruteforce, volume_sample, volume_sample_pmf,
    FastLeveragedSampler, FastSamplerOptions, RescalingDistribution, SubsetSample,
};

use super::oracle::{sequence_rank, ORACLE_CAP};
use super::CheckReport;

/// Significance level of every chi-square frequency test.
pub const CHI_SQUARE_SIGNIFICANCE: f64 = 1e-3;

/// Cells with smaller expected count are pooled before the chi-square
/// statistic is formed.
pub const MIN_EXPECTED_CELL: f64 = 5.0;

/// Standard errors of slack allowed on empirical means and fractions.
pub const STDERR_SLACK: f64 = 3.0;

/// Constant in the sample-size rule for the relative loss bound.
pub const LOSS_BOUND_CONSTANT: f64 = 8.0;

/// Target failure rate of the subspace embedding check.
pub const EMBED_FAILURE_RATE: f64 = 0.05;

fn tag(n: usize, d: usize, k: usize) -> String {
    format!("n={n} d={d} k={k}")
}

/// Chi-square goodness of fit of observed counts against a discrete law.
#[derive(Debug, Clone)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    /// Critical value at [`CHI_SQUARE_SIGNIFICANCE`].
    pub critical: f64,
    pub dof: usize,
    pub draws: u64,
    /// Number of pooled cells the statistic was formed over.
    pub cells: usize,
    /// Draws that landed on zero-probability outcomes; any such draw is a
    /// sampler bug regardless of the statistic.
    pub impossible_hits: u64,
}

impl GoodnessOfFit {
    pub fn passed(&self) -> bool {
        self.impossible_hits == 0 && self.statistic <= self.critical
    }
}

/// Pools consecutive low-expectation cells, then compares the statistic
/// against the inverse chi-square CDF.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> Result<GoodnessOfFit> {
    if counts.len() != probs.len() || counts.is_empty() {
        return Err(Error::InvalidSize {
            reason: "counts and probabilities must have equal nonzero length".into(),
        });
    }
    let draws: u64 = counts.iter().sum();
    if draws == 0 {
        return Err(Error::InvalidSize {
            reason: "goodness of fit needs at least one draw".into(),
        });
    }
    let total = draws as f64;
    let mut impossible_hits = 0u64;
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        if p <= 0.0 {
            impossible_hits += c;
            continue;
        }
        acc.0 += c as f64;
        acc.1 += p * total;
        if acc.1 >= MIN_EXPECTED_CELL {
            groups.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => groups.push(acc),
        }
    }
    if groups.len() < 2 {
        return Err(Error::InvalidDistribution {
            reason: "chi-square test needs at least two cells after pooling".into(),
        });
    }
    let statistic = groups
        .iter()
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum::<f64>();
    let dof = groups.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidDistribution {
        reason: format!("chi-square with {dof} degrees of freedom: {e}"),
    })?;
    Ok(GoodnessOfFit {
        statistic,
        critical: dist.inverse_cdf(1.0 - CHI_SQUARE_SIGNIFICANCE),
        dof,
        draws,
        cells: groups.len(),
        impossible_hits,
    })
}

/// `1/2 sum_i |counts_i/N - probs_i|`.
pub fn total_variation(counts: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let n = (total as f64).max(1.0);
    0.5 * counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| (c as f64 / n - p).abs())
        .sum::<f64>()
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn fraction_stderr(frac: f64, n: usize) -> f64 {
    (frac * (1.0 - frac) / n.max(1) as f64).sqrt()
}

/// Nearest-rank percentile of an unsorted slice, `p` in (0, 1].
fn percentile(xs: &[f64], p: f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn gof_report(name: String, gof: &GoodnessOfFit) -> CheckReport {
    CheckReport {
        name,
        passed: gof.passed(),
        observed: gof.statistic,
        expected: gof.critical,
        tolerance: 0.0,
        detail: format!(
            "chi-square over {} cells (dof {}), {} draws, {} impossible hits",
            gof.cells, gof.dof, gof.draws, gof.impossible_hits
        ),
    }
}

/// Volume sampler frequencies against its pmf.
pub fn check_volume_sampler_gof(
    x: &Matrix,
    k: usize,
    draws: u64,
    rng: &mut RngState,
) -> Result<CheckReport> {
    let (n, d) = x.shape();
    let outcomes = enumerate_subsets(n, k)?;
    let probs = outcomes
        .iter()
        .map(|s| volume_sample_pmf(x, &SubsetSample::new(s.clone())?))
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0u64; outcomes.len()];
    for _ in 0..draws {
        let s = volume_sample(x, k, rng)?;
        counts[subset_slot(&outcomes, s.indices())?] += 1;
    }
    let gof = chi_square_gof(&counts, &probs)?;
    Ok(gof_report(
        format!("volume_sampler_gof[{}]", tag(n, d, k)),
        &gof,
    ))
}

/// Leveraged volume sampler frequencies against the rescaled pmf with the
/// leverage mixture.
pub fn check_leveraged_sampler_gof(
    x: &Matrix,
    k: usize,
    draws: u64,
    rng: &mut RngState,
) -> Result<CheckReport> {
    let (n, d) = x.shape();
    let q = RescalingDistribution::from_leverage_scores(&leverage_scores(x)?)?;
    let probs = sequence_probs(x, &q, k)?;
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..draws {
        let pi = leveraged_volume_sample(x, k, rng)?;
        counts[sequence_rank(pi.indices(), n)] += 1;
    }
    let gof = chi_square_gof(&counts, &probs)?;
    Ok(gof_report(
        format!("leveraged_sampler_gof[{}]", tag(n, d, k)),
        &gof,
    ))
}

/// Brute-force CDF-inversion sampler frequencies against the rescaled pmf.
pub fn check_bruteforce_sampler_gof(
    x: &Matrix,
    q: &RescalingDistribution,
    k: usize,
    draws: u64,
    rng: &mut RngState,
) -> Result<CheckReport> {
    let (n, d) = x.shape();
    let probs = sequence_probs(x, q, k)?;
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..draws {
        let pi = rescaled_sample_bruteforce(x, q, k, rng)?;
        counts[sequence_rank(pi.indices(), n)] += 1;
    }
    let gof = chi_square_gof(&counts, &probs)?;
    Ok(gof_report(
        format!("bruteforce_sampler_gof[{}]", tag(n, d, k)),
        &gof,
    ))
}

/// Total variation between the sketch-free fast sampler and the enumerated
/// rescaled pmf; the two laws coincide exactly when epsilon is zero.
pub fn check_fast_matches_pmf(
    x: &Matrix,
    k: usize,
    draws: u64,
    rng: &mut RngState,
) -> Result<CheckReport> {
    let (n, d) = x.shape();
    let sampler = FastLeveragedSampler::new(x, FastSamplerOptions::for_epsilon(0.0), rng)?;
    let q = RescalingDistribution::from_leverage_scores(&leverage_scores(x)?)?;
    let probs = sequence_probs(x, &q, k)?;
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..draws {
        let pi = sampler.sample(x, k, rng)?;
        counts[sequence_rank(pi.indices(), n)] += 1;
    }
    Ok(CheckReport::at_most(
        format!("fast_sampler_tv[{}]", tag(n, d, k)),
        total_variation(&counts, &probs),
        0.02,
        0.0,
        format!(
            "total variation over {draws} draws, support {}",
            probs.len()
        ),
    ))
}

/// Rejection behaviour of the leveraged volume sampler: every raw
/// determinant ratio is a probability, and their mean matches the exact
/// acceptance rate `s (s-1) ... (s-d+1) / s^d >= 3/4`.
pub fn check_acceptance_rate(
    x: &Matrix,
    k: usize,
    trials: usize,
    rng: &mut RngState,
) -> Result<Vec<CheckReport>> {
    let (n, d) = x.shape();
    let s = proposal_count(k, d);
    let mut ratios = Vec::new();
    for _ in 0..trials {
        let (_, trace) = leveraged_volume_sample_traced(x, k, rng)?;
        ratios.extend(trace.acceptance_ratios);
    }
    let max_ratio = ratios.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let (mean, se) = mean_stderr(&ratios);
    let exact = falling_factorial(s, d) / (s as f64).powi(d as i32);
    let t = tag(n, d, k);
    Ok(vec![
        CheckReport::at_most(
            format!("acceptance_ratio_bound[{t}]"),
            max_ratio,
            1.0,
            1e-9,
            format!("max of {} raw ratios", ratios.len()),
        ),
        CheckReport::close_abs(
            format!("acceptance_mean[{t} s={s}]"),
            mean,
            exact,
            (STDERR_SLACK * se).max(1e-12),
            "mean ratio vs exact acceptance rate",
        ),
        CheckReport::at_least(
            format!("acceptance_floor[{t} s={s}]"),
            mean,
            0.75,
            STDERR_SLACK * se,
            "mean ratio vs the guaranteed floor",
        ),
    ])
}

/// `E ||(1/k) U^T Q_π r - U^T r||^2 <= (d/k + d^2/k^2) ||r||^2` for an
/// orthonormal U under leveraged volume sampling.
pub fn check_matrix_multiplication(
    u: &Matrix,
    r: &Vector,
    k: usize,
    trials: usize,
    rng: &mut RngState,
) -> Result<CheckReport> {
    let (n, d) = u.shape();
    if r.len() != n {
        return Err(Error::ShapeMismatch {
            reason: format!("vector length {} does not match {n} rows", r.len()),
        });
    }
    let target = u.transpose() * r;
    let df = d as f64;
    let kf = k as f64;
    let bound = (df / kf + df * df / (kf * kf)) * r.norm_squared();
    let mut errs = Vec::with_capacity(trials);
    for _ in 0..trials {
        let pi = leveraged_volume_sample(u, k, rng)?;
        let mut z = Vector::zeros(d);
        for (t, &i) in pi.indices().iter().enumerate() {
            let w = pi.rescale_weights()[t] * r[i] / kf;
            for c in 0..d {
                z[c] += w * u[(i, c)];
            }
        }
        errs.push((z - &target).norm_squared());
    }
    let (mean, se) = mean_stderr(&errs);
    Ok(CheckReport::at_most(
        format!("matrix_mult_bound[{}]", tag(n, d, k)),
        mean,
        bound,
        STDERR_SLACK * se,
        format!("mean squared error over {trials} trials"),
    ))
}

/// Sample size that makes leveraged volume sampling a subspace embedding
/// with the failure rate of [`EMBED_FAILURE_RATE`].
pub fn k_embed(d: usize) -> usize {
    (10.0 * d as f64 * ((d + 2) as f64).ln()).ceil() as usize
}

/// `λ_min((1/k) U^T Q_π U) > 1/8` holds in all but a small fraction of
/// draws once k reaches [`k_embed`].
pub fn check_subspace_embedding(
    u: &Matrix,
    k: usize,
    trials: usize,
    rng: &mut RngState,
) -> Result<CheckReport> {
    let (n, d) = u.shape();
    let mut failures = 0usize;
    for _ in 0..trials {
        let pi = leveraged_volume_sample(u, k, rng)?;
        let gram = pi.weighted_gram(u)?.scale(1.0 / k as f64);
        if min_eigenvalue_sym(&gram)? <= 0.125 {
            failures += 1;
        }
    }
    let frac = failures as f64 / trials as f64;
    Ok(CheckReport::at_most(
        format!("subspace_embedding[{}]", tag(n, d, k)),
        frac,
        EMBED_FAILURE_RATE,
        0.0,
        format!("failure fraction over {trials} trials"),
    ))
}

/// Sample size for a `(1+epsilon)`-approximate loss at constant confidence.
pub fn loss_bound_size(d: usize, epsilon: f64) -> usize {
    let df = d as f64;
    let k = (LOSS_BOUND_CONSTANT * (df * df.ln() + df / epsilon)).ceil() as usize;
    k.max(d)
}

/// The 90th percentile of `L(w_π*) / L(w*)` stays below `1 + epsilon` at
/// the sample size from [`loss_bound_size`].
pub fn check_loss_bound(
    p: &RegressionProblem,
    epsilon: f64,
    trials: usize,
    rng: &mut RngState,
) -> Result<CheckReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon {
            epsilon,
            limit: 1.0,
        });
    }
    if p.is_degenerate() {
        return Err(Error::DegenerateLoss);
    }
    let k = loss_bound_size(p.d(), epsilon);
    let mut ratios = Vec::with_capacity(trials);
    for _ in 0..trials {
        let pi = leveraged_volume_sample(p.x(), k, rng)?;
        ratios.push(rescaled_estimator(p, &pi)?.loss_ratio);
    }
    let q90 = percentile(&ratios, 0.9);
    Ok(CheckReport::at_most(
        format!("loss_ratio_q90[{} k={k}]", tag(p.n(), p.d(), k)),
        q90,
        1.0 + epsilon,
        0.0,
        format!("90th percentile over {trials} trials"),
    ))
}

/// Worst-case design for unweighted subset estimators: with the residual
/// target at 2/3 of a unit per dimension, volume sampling at any k <= n/2
/// lands a loss 1.5x the optimum more than a quarter of the time, and the
/// mean ratio stays well above one.
pub fn check_lower_bound(
    n: usize,
    d: usize,
    k: usize,
    reps: usize,
    rng: &mut RngState,
) -> Result<Vec<CheckReport>> {
    let gamma = solve_gamma_for_loss(n, d, 2.0 / 3.0)?;
    let p = lower_bound_instance(n, d, gamma)?;
    let mut ratios = Vec::with_capacity(reps);
    for _ in 0..reps {
        let s = volume_sample(p.x(), k, rng)?;
        ratios.push(subset_estimator(&p, &s)?.loss_ratio);
    }
    let tail = ratios.iter().filter(|&&r| r >= 1.5).count() as f64 / reps as f64;
    let (mean, se) = mean_stderr(&ratios);
    let t = tag(n, d, k);
    Ok(vec![
        CheckReport::at_least(
            format!("lower_bound_tail[{t}]"),
            tail,
            0.25,
            0.0,
            format!(
                "Pr[loss >= 1.5 optimum] over {reps} reps, stderr {:.2e}",
                fraction_stderr(tail, reps)
            ),
        ),
        CheckReport::at_least(
            format!("lower_bound_mean[{t}]"),
            mean,
            1.4,
            0.0,
            format!("mean loss ratio over {reps} reps, stderr {se:.2e}"),
        ),
    ])
}

/// Exact expected rejection count of the coupled sampler,
/// `sum_{t=k+1..n} d/(t-d)`.
pub fn expected_coupled_rejections(n: usize, d: usize, k: usize) -> f64 {
    (k + 1..=n).map(|t| d as f64 / (t - d) as f64).sum()
}

/// Coupled volume/uniform sampling: nesting, the marginal law of S, and
/// the rejection-count guarantees.
pub fn check_coupled(
    x: &Matrix,
    k: usize,
    runs: usize,
    rng: &mut RngState,
) -> Result<Vec<CheckReport>> {
    let (n, d) = x.shape();
    let outcomes = enumerate_subsets(n, k)?;
    let probs = outcomes
        .iter()
        .map(|s| volume_sample_pmf(x, &SubsetSample::new(s.clone())?))
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0u64; outcomes.len()];
    let mut nesting_violations = 0u64;
    let mut rejections = Vec::with_capacity(runs);
    for _ in 0..runs {
        let cs = coupled_sample(x, k, rng)?;
        if !cs.uniform.indices().iter().all(|&i| cs.volume.contains(i)) {
            nesting_violations += 1;
        }
        counts[subset_slot(&outcomes, cs.volume.indices())?] += 1;
        rejections.push(cs.rejections as f64);
    }
    let gof = chi_square_gof(&counts, &probs)?;
    let (mean, se) = mean_stderr(&rejections);
    let exact = expected_coupled_rejections(n, d, k);
    let log_bound = if k > d {
        d as f64 * ((n - d) as f64 / (k - d) as f64).ln()
    } else {
        f64::INFINITY
    };
    let t = tag(n, d, k);
    Ok(vec![
        CheckReport::at_most(
            format!("coupled_nesting[{t}]"),
            nesting_violations as f64,
            0.0,
            0.0,
            format!("runs with T not inside S, out of {runs}"),
        ),
        gof_report(format!("coupled_volume_gof[{t}]"), &gof),
        CheckReport::close_abs(
            format!("coupled_rejections_mean[{t}]"),
            mean,
            exact,
            (STDERR_SLACK * se).max(1e-12),
            format!("mean rejections over {runs} runs"),
        ),
        CheckReport::at_most(
            format!("coupled_rejections_log_bound[{t}]"),
            mean,
            log_bound,
            STDERR_SLACK * se,
            "mean rejections vs d ln((n-d)/(k-d))",
        ),
    ])
}

/// Tail bound on the coupled rejection count:
/// `Pr[R >= a E[R]] <= e^{a/2} ((k-d)/(n-d))^{a/2-1}`.
pub fn check_coupled_tail(
    x: &Matrix,
    k: usize,
    runs: usize,
    a: f64,
    rng: &mut RngState,
) -> Result<CheckReport> {
    let (n, d) = x.shape();
    if k <= d {
        return Err(Error::InvalidSize {
            reason: format!("tail bound needs k={k} > d={d}"),
        });
    }
    if a <= 2.0 {
        return Err(Error::InvalidConfig {
            reason: format!("tail factor a={a} must exceed 2 for a nontrivial bound"),
        });
    }
    let threshold = a * expected_coupled_rejections(n, d, k);
    let mut hits = 0usize;
    for _ in 0..runs {
        if coupled_sample(x, k, rng)?.rejections as f64 >= threshold {
            hits += 1;
        }
    }
    let frac = hits as f64 / runs as f64;
    let limit = (a / 2.0).exp() * ((k - d) as f64 / (n - d) as f64).powf(a / 2.0 - 1.0);
    Ok(CheckReport::at_most(
        format!("coupled_tail[{} a={a}]", tag(n, d, k)),
        frac,
        limit,
        STDERR_SLACK * fraction_stderr(frac, runs),
        format!("Pr[R >= {threshold:.2}] over {runs} runs"),
    ))
}

/// Rejection behaviour of the sketch-based sampler: outer determinant
/// ratios are probabilities with mean at least 3/4, and the inner
/// thinning parameter never exceeds one.
pub fn check_fast_sampler(
    x: &Matrix,
    k: usize,
    trials: usize,
    options: FastSamplerOptions,
    rng: &mut RngState,
) -> Result<Vec<CheckReport>> {
    let (n, d) = x.shape();
    let sampler = FastLeveragedSampler::new(x, options, rng)?;
    let mut ratios = Vec::new();
    let mut max_inner: f64 = 0.0;
    for _ in 0..trials {
        let (_, trace) = sampler.sample_traced(x, k, rng)?;
        ratios.extend(trace.outer_ratios);
        max_inner = max_inner.max(trace.max_inner_param);
    }
    let max_ratio = ratios.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let (mean, se) = mean_stderr(&ratios);
    let t = format!("{} eps={}", tag(n, d, k), options.epsilon);
    Ok(vec![
        CheckReport::at_most(
            format!("fast_outer_ratio_bound[{t}]"),
            max_ratio,
            1.0,
            1e-9,
            format!("max of {} raw outer ratios", ratios.len()),
        ),
        CheckReport::at_least(
            format!("fast_acceptance_mean[{t}]"),
            mean,
            0.75,
            STDERR_SLACK * se,
            "mean outer ratio vs the guaranteed floor",
        ),
        CheckReport::at_most(
            format!("fast_inner_param[{t}]"),
            max_inner,
            1.0,
            1e-9,
            "largest inner thinning parameter",
        ),
    ])
}

fn enumerate_subsets(n: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    let support = crate::enumerate::binomial(n, k);
    if !(support.is_finite() && support <= ORACLE_CAP as f64) {
        return Err(Error::TooLarge {
            support: support as u128,
            cap: ORACLE_CAP,
        });
    }
    Ok(subsets(n, k).collect())
}

fn subset_slot(outcomes: &[Vec<usize>], indices: &[usize]) -> Result<usize> {
    outcomes
        .binary_search_by(|probe| probe.as_slice().cmp(indices))
        .map_err(|_| Error::InvalidSize {
            reason: format!("sampler produced a subset outside the support: {indices:?}"),
        })
}

fn sequence_probs(x: &Matrix, q: &RescalingDistribution, k: usize) -> Result<Vec<f64>> {
    let (n, _) = x.shape();
    let support = sequence_count(n, k).unwrap_or(u128::MAX);
    if support > ORACLE_CAP {
        return Err(Error::TooLarge {
            support,
            cap: ORACLE_CAP,
        });
    }
    sequences(n, k)
        .map(|pi| rescaled_pmf(x, q, k, &pi))
        .collect()
}
