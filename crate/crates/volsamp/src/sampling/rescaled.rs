//! Rescaled (sequence) sampling and the determinantal rejection sampler.
//!
//! A rescaled sample is a sequence π of k row indices drawn with repeats,
//! where the joint law is proportional to `det(X^T Q_π X) prod_t q_{π_t}`
//! and `Q_π = sum_t (1/q_{π_t}) e_{π_t} e_{π_t}^T`. The normalizing constant
//! is `k(k-1)...(k-d+1) det(X^T X)` for any positive q summing to one; this
//! holds for every k >= d, including k > n.
//!
//! With `q_i = l_i / d` (the leverage mixture), the weighted Gram matrix is
//! an unbiased estimator of `X^T X` and the joint law factors into an i.i.d.
//! proposal times a determinant that is at most one, which is exactly the
//! setting for rejection sampling: propose `s = max(k, 4 d^2)` i.i.d. rows,
//! accept with the determinant ratio (expected acceptance at least 3/4),
//! then reduce the accepted sequence to size k with a volume subsample of
//! the rescaled rows.

use crate::enumerate::{falling_factorial, sequence_count, sequences};
use crate::error::{Error, Result};
use crate::linalg::{accumulate_outer, gram_factorize, leverage_scores_with, logdet_spd, Matrix};
use crate::rng::RngState;
use crate::sampling::{
    clamp_probability, volume_sample, RescalingDistribution, SampleSequence, ENUMERATION_CAP,
    MAX_TRIALS,
};

/// Number of i.i.d. proposals drawn per rejection trial: `max(k, 4 d^2)`.
pub fn proposal_count(k: usize, d: usize) -> usize {
    k.max(4 * d * d)
}

/// Probability of drawing exactly the sequence `pi` (order sensitive) under
/// rescaled sampling with distribution `q` and size `k = pi.len()`.
pub fn rescaled_pmf(x: &Matrix, q: &RescalingDistribution, k: usize, pi: &[usize]) -> Result<f64> {
    let (n, d) = x.shape();
    check_sequence_inputs(n, d, k, q)?;
    if pi.len() != k {
        return Err(Error::InvalidSize {
            reason: format!("sequence has length {} but k={k}", pi.len()),
        });
    }
    if let Some(&bad) = pi.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            rows: n,
        });
    }
    let fact = gram_factorize(x)?;
    let mut weighted = Matrix::zeros(d, d);
    let mut ln_q_prod = 0.0;
    for &i in pi {
        accumulate_outer(&mut weighted, x, i, 1.0 / q.weight(i));
        ln_q_prod += q.weight(i).ln();
    }
    match logdet_spd(&weighted) {
        None => Ok(0.0),
        Some(logdet) => {
            let ln_norm = falling_factorial(k, d).ln() + fact.log_det();
            Ok((logdet + ln_q_prod - ln_norm).exp())
        }
    }
}

/// Draws one rescaled sample by enumerating the entire support `[n]^k` and
/// inverting the CDF. Only feasible for `n^k` up to [`ENUMERATION_CAP`];
/// serves as the ground-truth sampler in tests.
pub fn rescaled_sample_bruteforce(
    x: &Matrix,
    q: &RescalingDistribution,
    k: usize,
    rng: &mut RngState,
) -> Result<SampleSequence> {
    rescaled_sample_bruteforce_capped(x, q, k, rng, ENUMERATION_CAP)
}

/// [`rescaled_sample_bruteforce`] with an explicit support cap.
pub fn rescaled_sample_bruteforce_capped(
    x: &Matrix,
    q: &RescalingDistribution,
    k: usize,
    rng: &mut RngState,
    cap: u128,
) -> Result<SampleSequence> {
    let (n, d) = x.shape();
    check_sequence_inputs(n, d, k, q)?;
    let support = sequence_count(n, k).unwrap_or(u128::MAX);
    if support > cap {
        return Err(Error::TooLarge { support, cap });
    }
    let u = rng.uniform();
    let mut acc = 0.0;
    let mut last_positive: Option<Vec<usize>> = None;
    for pi in sequences(n, k) {
        let p = rescaled_pmf(x, q, k, &pi)?;
        if p > 0.0 {
            acc += p;
            if u < acc {
                return sequence_with_weights(pi, q);
            }
            last_positive = Some(pi);
        }
    }
    // The pmf sums to one; landing here means u fell into the roundoff
    // residue at the top of the CDF.
    debug_assert!(acc > 1.0 - 1e-8, "pmf sums to {acc}, expected 1");
    let pi = last_positive.ok_or(Error::InvalidDistribution {
        reason: "no sequence has positive probability".into(),
    })?;
    sequence_with_weights(pi, q)
}

/// Trace of one determinantal rejection run.
#[derive(Debug, Clone)]
pub struct RejectionTrace {
    /// Raw determinant ratio of every proposal, before clamping.
    pub acceptance_ratios: Vec<f64>,
    /// Number of proposals drawn (equals `acceptance_ratios.len()`).
    pub trials: usize,
}

/// Leveraged volume sampling: rescaled sampling with `q_i = l_i / d`.
///
/// Proposes i.i.d. leverage-score sequences of length `max(k, 4 d^2)`,
/// accepts by determinant ratio, and reduces to size k by composition with
/// a volume subsample. Returned weights are `1/q_{π_t} = d/l_{π_t}`.
pub fn leveraged_volume_sample(x: &Matrix, k: usize, rng: &mut RngState) -> Result<SampleSequence> {
    leveraged_volume_sample_traced(x, k, rng).map(|(seq, _)| seq)
}

/// [`leveraged_volume_sample`] returning the rejection trace alongside the
/// sample, for acceptance-rate diagnostics.
pub fn leveraged_volume_sample_traced(
    x: &Matrix,
    k: usize,
    rng: &mut RngState,
) -> Result<(SampleSequence, RejectionTrace)> {
    let d = x.ncols();
    let fact = gram_factorize(x)?;
    let scores = leverage_scores_with(x, &fact)?;
    let q = RescalingDistribution::from_leverage_scores(&scores)?;
    if k < d {
        return Err(Error::InvalidSize {
            reason: format!("sequence size k={k} is below the column dimension d={d}"),
        });
    }
    let s = proposal_count(k, d);

    let mut ratios = Vec::new();
    let mut accepted: Option<Vec<usize>> = None;
    let mut proposal = vec![0usize; s];
    for _ in 0..MAX_TRIALS {
        for slot in proposal.iter_mut() {
            *slot = q.draw(rng);
        }
        let ratio = determinant_ratio(x, &q, &proposal, s, fact.log_det());
        ratios.push(ratio);
        if rng.bernoulli(clamp_probability(ratio)) {
            accepted = Some(proposal.clone());
            break;
        }
    }
    let pi_big = accepted.ok_or(Error::NonConvergence { trials: MAX_TRIALS })?;
    let trials = ratios.len();
    let base = sequence_with_weights(pi_big, &q)?;
    let reduced = compose_subsample(x, &q, &base, k, rng)?;
    Ok((
        reduced,
        RejectionTrace {
            acceptance_ratios: ratios,
            trials,
        },
    ))
}

/// `det((1/s) X^T Q_π X) / det(X^T X)` in log space; zero when the weighted
/// Gram matrix is singular.
fn determinant_ratio(
    x: &Matrix,
    q: &RescalingDistribution,
    pi: &[usize],
    s: usize,
    log_det_full: f64,
) -> f64 {
    let d = x.ncols();
    let mut weighted = Matrix::zeros(d, d);
    let inv_s = 1.0 / s as f64;
    for &i in pi {
        accumulate_outer(&mut weighted, x, i, inv_s / q.weight(i));
    }
    match logdet_spd(&weighted) {
        None => 0.0,
        Some(logdet) => (logdet - log_det_full).exp(),
    }
}

/// i.i.d. sampling of k rows from `q`, with importance weights `1/q_{π_t}`.
/// Any `k >= 1` is allowed; the weighted estimator downstream falls back to
/// a minimum-norm solve when the drawn rows do not span.
pub fn leverage_iid_sample(
    q: &RescalingDistribution,
    k: usize,
    rng: &mut RngState,
) -> Result<SampleSequence> {
    if k == 0 {
        return Err(Error::InvalidSize {
            reason: "sequence size k must be at least 1".into(),
        });
    }
    let pi: Vec<usize> = (0..k).map(|_| q.draw(rng)).collect();
    sequence_with_weights(pi, q)
}

/// Reduces a rescaled sample to size k by volume sampling the rescaled rows
/// `x_{π_t} / sqrt(q_{π_t})`, keeping the surviving positions in order.
///
/// Composition preserves the rescaled family: an s-sequence from the
/// q-rescaled law reduced to k positions is distributed as a k-sequence from
/// the q-rescaled law. Weights are inherited from `base`.
pub fn compose_subsample(
    x: &Matrix,
    q: &RescalingDistribution,
    base: &SampleSequence,
    k: usize,
    rng: &mut RngState,
) -> Result<SampleSequence> {
    let (n, d) = x.shape();
    check_sequence_inputs(n, d, k, q)?;
    if let Some(&bad) = base.indices().iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            rows: n,
        });
    }
    if k > base.k() {
        return Err(Error::InvalidSize {
            reason: format!("cannot reduce a sequence of length {} to k={k}", base.k()),
        });
    }
    let mut rescaled = Matrix::zeros(base.k(), d);
    for (t, &i) in base.indices().iter().enumerate() {
        let scale = 1.0 / q.weight(i).sqrt();
        for c in 0..d {
            rescaled[(t, c)] = x[(i, c)] * scale;
        }
    }
    let positions = volume_sample(&rescaled, k, rng)?;
    let indices = positions
        .indices()
        .iter()
        .map(|&t| base.indices()[t])
        .collect();
    let weights = positions
        .indices()
        .iter()
        .map(|&t| base.rescale_weights()[t])
        .collect();
    SampleSequence::new(indices, weights)
}

fn check_sequence_inputs(n: usize, d: usize, k: usize, q: &RescalingDistribution) -> Result<()> {
    if q.len() != n {
        return Err(Error::ShapeMismatch {
            reason: format!("distribution over {} indices vs {n} rows", q.len()),
        });
    }
    if k < d {
        return Err(Error::InvalidSize {
            reason: format!("sequence size k={k} is below the column dimension d={d}"),
        });
    }
    Ok(())
}

fn sequence_with_weights(pi: Vec<usize>, q: &RescalingDistribution) -> Result<SampleSequence> {
    let weights = pi.iter().map(|&i| 1.0 / q.weight(i)).collect();
    SampleSequence::new(pi, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ones2() -> (Matrix, RescalingDistribution) {
        let x = Matrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let q = RescalingDistribution::uniform(2).unwrap();
        (x, q)
    }

    fn x42() -> Matrix {
        Matrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, -1.0])
    }

    #[test]
    fn pmf_on_two_identical_rows_is_uniform() {
        // Every sequence has the same weighted Gram, so all four length-2
        // sequences get probability 1/4.
        let (x, q) = ones2();
        for pi in sequences(2, 2) {
            assert_relative_eq!(rescaled_pmf(&x, &q, 2, &pi).unwrap(), 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn pmf_sums_to_one_including_k_beyond_n() {
        let x = Matrix::from_row_slice(2, 1, &[1.0, -2.0]);
        let q = RescalingDistribution::new(vec![0.3, 0.7]).unwrap();
        for k in [1usize, 2, 3, 5] {
            let total: f64 = sequences(2, k)
                .map(|pi| rescaled_pmf(&x, &q, k, &pi).unwrap())
                .sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn pmf_sums_to_one_on_plane_instance() {
        let x = x42();
        let q = RescalingDistribution::normalized(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        for k in 2..=4 {
            let total: f64 = sequences(4, k)
                .map(|pi| rescaled_pmf(&x, &q, k, &pi).unwrap())
                .sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn pmf_of_non_spanning_sequence_is_zero() {
        let x = x42();
        let q = RescalingDistribution::uniform(4).unwrap();
        // A repeated single row cannot span a 2-dimensional column space.
        assert_eq!(rescaled_pmf(&x, &q, 2, &[0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn pmf_checks_arguments() {
        let (x, q) = ones2();
        assert!(matches!(
            rescaled_pmf(&x, &q, 2, &[0]),
            Err(Error::InvalidSize { .. })
        ));
        assert!(matches!(
            rescaled_pmf(&x, &q, 2, &[0, 5]),
            Err(Error::IndexOutOfRange { .. })
        ));
        let q3 = RescalingDistribution::uniform(3).unwrap();
        assert!(matches!(
            rescaled_pmf(&x, &q3, 2, &[0, 1]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn bruteforce_sampler_matches_pmf() {
        let (x, q) = ones2();
        let mut rng = RngState::new(4);
        let mut counts = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            let s = rescaled_sample_bruteforce(&x, &q, 2, &mut rng).unwrap();
            counts[s.indices()[0] * 2 + s.indices()[1]] += 1;
        }
        for c in counts {
            let freq = c as f64 / n as f64;
            // Each cell has p = 1/4; 3 sigma over 100k draws is ~0.0041.
            assert!((freq - 0.25).abs() < 0.005, "freq {freq}");
        }
    }

    #[test]
    fn bruteforce_respects_cap() {
        let (x, q) = ones2();
        let mut rng = RngState::new(4);
        assert!(matches!(
            rescaled_sample_bruteforce_capped(&x, &q, 30, &mut rng, 1000),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn bruteforce_weights_are_inverse_q() {
        let x = Matrix::from_row_slice(2, 1, &[1.0, -2.0]);
        let q = RescalingDistribution::new(vec![0.25, 0.75]).unwrap();
        let s = rescaled_sample_bruteforce(&x, &q, 2, &mut RngState::new(8)).unwrap();
        for (&i, &w) in s.indices().iter().zip(s.rescale_weights()) {
            assert_relative_eq!(w, 1.0 / q.weight(i), epsilon = 1e-12);
        }
    }

    #[test]
    fn proposal_count_floor() {
        assert_eq!(proposal_count(2, 2), 16);
        assert_eq!(proposal_count(40, 2), 40);
        assert_eq!(proposal_count(3, 1), 4);
    }

    #[test]
    fn leveraged_sample_has_right_shape_and_weights() {
        let x = x42();
        let scores = crate::linalg::leverage_scores(&x).unwrap();
        let mut rng = RngState::new(12);
        let (seq, trace) = leveraged_volume_sample_traced(&x, 2, &mut rng).unwrap();
        assert_eq!(seq.k(), 2);
        assert!(trace.trials >= 1);
        assert!(trace.acceptance_ratios.iter().all(|&r| r <= 1.0 + 1e-9));
        let total: f64 = scores.iter().sum();
        for (&i, &w) in seq.indices().iter().zip(seq.rescale_weights()) {
            // 1/q_i = sum(l)/l_i with sum(l) = d up to roundoff.
            assert_relative_eq!(w, total / scores[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn leveraged_sample_rejects_small_k() {
        let x = x42();
        assert!(matches!(
            leveraged_volume_sample(&x, 1, &mut RngState::new(1)),
            Err(Error::InvalidSize { .. })
        ));
    }

    #[test]
    fn acceptance_ratio_is_one_in_dimension_one() {
        // With d = 1 the determinant equals the trace, which the leverage
        // mixture normalizes exactly, so every proposal is accepted with
        // probability one.
        let x = Matrix::from_row_slice(3, 1, &[1.0, -2.0, 0.5]);
        let mut rng = RngState::new(100);
        for _ in 0..50 {
            let (_, trace) = leveraged_volume_sample_traced(&x, 2, &mut rng).unwrap();
            assert_eq!(trace.trials, 1);
            for &r in &trace.acceptance_ratios {
                assert_relative_eq!(r, 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn iid_sample_draws_k_rows() {
        let q = RescalingDistribution::new(vec![0.5, 0.5]).unwrap();
        let s = leverage_iid_sample(&q, 5, &mut RngState::new(2)).unwrap();
        assert_eq!(s.k(), 5);
        assert!(s.indices().iter().all(|&i| i < 2));
        assert!(s.rescale_weights().iter().all(|&w| w == 2.0));
        assert!(leverage_iid_sample(&q, 0, &mut RngState::new(2)).is_err());
    }

    #[test]
    fn iid_sample_with_near_point_mass() {
        let q = RescalingDistribution::new(vec![1.0 - 1e-12, 1e-12]).unwrap();
        let s = leverage_iid_sample(&q, 50, &mut RngState::new(2)).unwrap();
        assert!(s.indices().iter().all(|&i| i == 0));
    }

    #[test]
    fn compose_identity_when_k_matches() {
        let x = x42();
        let q = RescalingDistribution::uniform(4).unwrap();
        let base = SampleSequence::new(vec![2, 0, 1], vec![4.0, 4.0, 4.0]).unwrap();
        let out = compose_subsample(&x, &q, &base, 3, &mut RngState::new(5)).unwrap();
        assert_eq!(out.indices(), base.indices());
        assert_eq!(out.rescale_weights(), base.rescale_weights());
    }

    #[test]
    fn compose_preserves_order_and_weights() {
        let x = x42();
        let q = RescalingDistribution::normalized(vec![1.0, 1.0, 1.0, 2.0]).unwrap();
        let base = SampleSequence::new(vec![3, 1, 0, 2], vec![2.5, 5.0, 5.0, 5.0]).unwrap();
        let mut rng = RngState::new(9);
        for _ in 0..50 {
            let out = compose_subsample(&x, &q, &base, 2, &mut rng).unwrap();
            assert_eq!(out.k(), 2);
            // Surviving entries appear in base order with their own weights.
            let pos: Vec<usize> = out
                .indices()
                .iter()
                .zip(out.rescale_weights())
                .map(|(&i, &w)| {
                    base.indices()
                        .iter()
                        .zip(base.rescale_weights())
                        .position(|(&bi, &bw)| bi == i && bw == w)
                        .expect("output entry must come from base")
                })
                .collect();
            assert!(pos.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn compose_rejects_oversized_k() {
        let x = x42();
        let q = RescalingDistribution::uniform(4).unwrap();
        let base = SampleSequence::new(vec![0, 1], vec![4.0, 4.0]).unwrap();
        assert!(matches!(
            compose_subsample(&x, &q, &base, 3, &mut RngState::new(1)),
            Err(Error::InvalidSize { .. })
        ));
    }

    #[test]
    fn sampler_is_reproducible() {
        let x = x42();
        let a = leveraged_volume_sample(&x, 3, &mut RngState::new(17)).unwrap();
        let b = leveraged_volume_sample(&x, 3, &mut RngState::new(17)).unwrap();
        assert_eq!(a, b);
    }
}
