//! Volume sampling of row subsets by reverse iterative elimination.
//!
//! Starting from all n rows, one row is removed at a time until k remain;
//! row i is removed with probability proportional to the determinant ratio
//! `det(X_{S-i}^T X_{S-i}) / det(X_S^T X_S) = 1 - x_i^T (X_S^T X_S)^{-1} x_i`.
//! The marginal law of the surviving set S is the volume sampling
//! distribution `Pr(S) ∝ det(X_S^T X_S)`.
//!
//! Each removal step draws a uniform candidate and accepts it with the
//! determinant ratio above, which needs one quadratic form instead of
//! recomputing all |S| ratios; the expected number of candidate draws per
//! removal is |S|/(|S|-d). The inverse Gram of the surviving rows is
//! maintained by rank-one downdates and rebuilt from scratch every
//! [`REFACTOR_EVERY`] removals to stop roundoff drift.

use crate::enumerate::binomial;
use crate::error::{Error, Result};
use crate::linalg::{
    accumulate_outer, gram_factorize, leverage_scores, logdet_spd, quad_form_row, Matrix, Vector,
};
use crate::rng::RngState;
use crate::sampling::{clamp_probability, SubsetSample, MAX_TRIALS};

/// Downdated inverses are rebuilt from the surviving rows this often.
pub const REFACTOR_EVERY: usize = 50;

/// Draws a size-k subset S with `Pr(S) ∝ det(X_S^T X_S)`.
///
/// Requires `d <= k <= n` and full column rank. With `k == n` the full index
/// set is returned without consuming randomness.
pub fn volume_sample(x: &Matrix, k: usize, rng: &mut RngState) -> Result<SubsetSample> {
    let (n, d) = x.shape();
    check_subset_size(n, d, k)?;
    let fact = gram_factorize(x)?;

    let mut active: Vec<usize> = (0..n).collect();
    let mut inv = fact.inverse().clone();
    let mut scratch = Vector::zeros(d);
    let mut removals = 0usize;

    while active.len() > k {
        let t = active.len();
        let mut accepted: Option<(usize, f64)> = None;
        for _ in 0..MAX_TRIALS {
            let pos = rng.below(t);
            let leverage = quad_form_row(&inv, x, active[pos]);
            let p = clamp_probability(1.0 - leverage);
            if rng.bernoulli(p) {
                accepted = Some((pos, leverage));
                break;
            }
        }
        let (pos, leverage) = accepted.ok_or(Error::NonConvergence { trials: MAX_TRIALS })?;
        let row = active.swap_remove(pos);
        removals += 1;

        if active.len() == k {
            break;
        }
        if removals % REFACTOR_EVERY == 0 {
            inv = gram_inverse_of(x, &active)?;
        } else {
            sherman_morrison_downdate(&mut inv, x, row, leverage, &mut scratch);
        }
    }

    SubsetSample::new(active)
}

/// Probability that [`volume_sample`] with `k = s.k()` returns `s`:
/// `det(X_S^T X_S) / (C(n-d, k-d) det(X^T X))`. Subsets whose rows do not
/// span get probability zero.
pub fn volume_sample_pmf(x: &Matrix, s: &SubsetSample) -> Result<f64> {
    let (n, d) = x.shape();
    let k = s.k();
    check_subset_size(n, d, k)?;
    if let Some(&bad) = s.indices().iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            rows: n,
        });
    }
    let fact = gram_factorize(x)?;
    let mut gram_s = Matrix::zeros(d, d);
    for &i in s.indices() {
        accumulate_outer(&mut gram_s, x, i, 1.0);
    }
    match logdet_spd(&gram_s) {
        None => Ok(0.0),
        Some(logdet_s) => {
            let ln_count = binomial(n - d, k - d).ln();
            Ok((logdet_s - ln_count - fact.log_det()).exp())
        }
    }
}

/// Marginal inclusion probability `Pr(i in S) = 1 - theta (1 - l_i)` with
/// `theta = (n-k)/(n-d)` under volume sampling.
pub fn volume_marginal(x: &Matrix, k: usize, i: usize) -> Result<f64> {
    let (n, d) = x.shape();
    check_subset_size(n, d, k)?;
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, rows: n });
    }
    let scores = leverage_scores(x)?;
    let theta = if n > d {
        (n - k) as f64 / (n - d) as f64
    } else {
        0.0
    };
    Ok(1.0 - theta * (1.0 - scores[i]))
}

/// Output of [`coupled_sample`]: a volume-sampled set, a uniform subsample
/// of it, and the number of rejected removal attempts.
#[derive(Debug, Clone)]
pub struct CoupledSample {
    /// S, distributed as `volume_sample(x, k)`.
    pub volume: SubsetSample,
    /// T ⊆ S, uniform without replacement given its (random) size.
    pub uniform: SubsetSample,
    /// Number of draws that landed in S but were not removed.
    pub rejections: u64,
}

/// Runs volume sampling and uniform sampling off one candidate stream.
///
/// Both S and T start as all n rows. Each step draws i uniformly from the
/// full index range; T always discards i, while S discards it only with the
/// usual determinant-ratio probability. T ⊆ S holds throughout, S has the
/// volume sampling law, and the rejection count concentrates around
/// `sum_{t=k+1..n} d/(t-d)`, which certifies the sampler's complexity.
pub fn coupled_sample(x: &Matrix, k: usize, rng: &mut RngState) -> Result<CoupledSample> {
    let (n, d) = x.shape();
    check_subset_size(n, d, k)?;
    let fact = gram_factorize(x)?;

    let mut in_s = vec![true; n];
    let mut in_t = vec![true; n];
    let mut s_size = n;
    let mut inv = fact.inverse().clone();
    let mut scratch = Vector::zeros(d);
    let mut removals = 0usize;
    let mut rejections = 0u64;

    // A removal happens with probability (t-d)/n per draw, so the budget per
    // removal scales with n; exceeding it indicates a bug.
    let draw_budget = MAX_TRIALS.saturating_mul(n.max(1));
    let mut draws_since_removal = 0usize;

    while s_size > k {
        let i = rng.below(n);
        in_t[i] = false;
        if !in_s[i] {
            draws_since_removal += 1;
            if draws_since_removal > draw_budget {
                return Err(Error::NonConvergence {
                    trials: draw_budget,
                });
            }
            continue;
        }
        let leverage = quad_form_row(&inv, x, i);
        let p = clamp_probability(1.0 - leverage);
        if rng.bernoulli(p) {
            in_s[i] = false;
            s_size -= 1;
            removals += 1;
            draws_since_removal = 0;
            if s_size == k {
                break;
            }
            if removals % REFACTOR_EVERY == 0 {
                let active: Vec<usize> = (0..n).filter(|&j| in_s[j]).collect();
                inv = gram_inverse_of(x, &active)?;
            } else {
                sherman_morrison_downdate(&mut inv, x, i, leverage, &mut scratch);
            }
        } else {
            rejections += 1;
            draws_since_removal += 1;
            if draws_since_removal > draw_budget {
                return Err(Error::NonConvergence {
                    trials: draw_budget,
                });
            }
        }
    }

    let volume = SubsetSample::new((0..n).filter(|&j| in_s[j]).collect())?;
    let uniform = SubsetSample::new((0..n).filter(|&j| in_t[j]).collect())?;
    Ok(CoupledSample {
        volume,
        uniform,
        rejections,
    })
}

fn check_subset_size(n: usize, d: usize, k: usize) -> Result<()> {
    if k < d {
        return Err(Error::InvalidSize {
            reason: format!("subset size k={k} is below the column dimension d={d}"),
        });
    }
    if k > n {
        return Err(Error::InvalidSize {
            reason: format!("subset size k={k} exceeds the number of rows n={n}"),
        });
    }
    Ok(())
}

/// `(A - x_i x_i^T)^{-1}` from `A^{-1}` by Sherman-Morrison, given
/// `leverage = x_i^T A^{-1} x_i`.
fn sherman_morrison_downdate(
    inv: &mut Matrix,
    x: &Matrix,
    i: usize,
    leverage: f64,
    scratch: &mut Vector,
) {
    let d = inv.nrows();
    let row = x.row(i);
    for a in 0..d {
        let mut t = 0.0;
        for b in 0..d {
            t += inv[(a, b)] * row[b];
        }
        scratch[a] = t;
    }
    let denom = 1.0 - leverage;
    for a in 0..d {
        let sa = scratch[a] / denom;
        for b in 0..d {
            inv[(a, b)] += sa * scratch[b];
        }
    }
}

/// Fresh inverse Gram of the given rows.
fn gram_inverse_of(x: &Matrix, rows: &[usize]) -> Result<Matrix> {
    let d = x.ncols();
    let mut gram = Matrix::zeros(d, d);
    for &i in rows {
        accumulate_outer(&mut gram, x, i, 1.0);
    }
    nalgebra::Cholesky::new(gram)
        .map(|c| c.inverse())
        .ok_or(Error::RankDeficient {
            ratio: 0.0,
            hint: "surviving rows lost full rank during refactorization",
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn x3() -> Matrix {
        Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    }

    #[test]
    fn pmf_is_uniform_on_symmetric_design() {
        // All three 2-subsets of x3 span parallelograms of equal area, so
        // each has probability 1/3.
        let x = x3();
        for pair in [[0, 1], [0, 2], [1, 2]] {
            let s = SubsetSample::new(pair.to_vec()).unwrap();
            assert_relative_eq!(
                volume_sample_pmf(&x, &s).unwrap(),
                1.0 / 3.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn pmf_sums_to_one() {
        let x = Matrix::from_row_slice(5, 2, &[1.0, 0.2, -0.5, 1.0, 2.0, -1.0, 0.3, 0.7, 1.5, 1.1]);
        for k in 2..=5 {
            let total: f64 = crate::enumerate::subsets(5, k)
                .map(|s| volume_sample_pmf(&x, &SubsetSample::new(s).unwrap()).unwrap())
                .sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn pmf_of_degenerate_square_subset_is_zero() {
        // At k = d a subset containing the zero row spans no volume.
        let x = Matrix::from_row_slice(3, 1, &[1.0, 0.0, 2.0]);
        let s = SubsetSample::new(vec![1]).unwrap();
        assert_eq!(volume_sample_pmf(&x, &s).unwrap(), 0.0);
    }

    #[test]
    fn k_equals_n_returns_everything() {
        let x = x3();
        let mut rng = RngState::new(1);
        let before = rng.clone().uniform();
        let s = volume_sample(&x, 3, &mut rng).unwrap();
        assert_eq!(s.indices(), &[0, 1, 2]);
        // No randomness consumed.
        assert_eq!(rng.uniform(), before);
    }

    #[test]
    fn size_bounds_are_enforced() {
        let x = x3();
        let mut rng = RngState::new(1);
        assert!(matches!(
            volume_sample(&x, 1, &mut rng),
            Err(Error::InvalidSize { .. })
        ));
        assert!(matches!(
            volume_sample(&x, 4, &mut rng),
            Err(Error::InvalidSize { .. })
        ));
    }

    #[test]
    fn sampler_is_reproducible() {
        let x = Matrix::from_row_slice(
            6,
            2,
            &[
                1.0, 0.2, -0.5, 1.0, 2.0, -1.0, 0.3, 0.7, 1.5, 1.1, -0.9, 0.4,
            ],
        );
        let a = volume_sample(&x, 3, &mut RngState::new(77)).unwrap();
        let b = volume_sample(&x, 3, &mut RngState::new(77)).unwrap();
        assert_eq!(a, b);
        let c = volume_sample(&x, 3, &mut RngState::new(78)).unwrap();
        // Different seeds are allowed to collide occasionally, but not here.
        assert_ne!(a, c);
    }

    #[test]
    fn zero_volume_pairs_are_never_sampled() {
        // Rows 0,1 are parallel and rows 2,3 are parallel: subsets {0,1} and
        // {2,3} span zero volume and must never appear.
        let x = Matrix::from_row_slice(4, 2, &[1.0, 0.0, 2.0, 0.0, 0.0, 1.0, 0.0, 2.0]);
        let mut rng = RngState::new(5);
        for _ in 0..2000 {
            let s = volume_sample(&x, 2, &mut rng).unwrap();
            let idx = s.indices();
            assert_ne!(idx, &[0, 1]);
            assert_ne!(idx, &[2, 3]);
        }
    }

    #[test]
    fn empirical_frequencies_match_pmf() {
        let x = x3();
        let mut rng = RngState::new(42);
        let mut counts = [0usize; 3];
        let n = 30_000;
        for _ in 0..n {
            let s = volume_sample(&x, 2, &mut rng).unwrap();
            let slot = match s.indices() {
                [0, 1] => 0,
                [0, 2] => 1,
                [1, 2] => 2,
                other => panic!("unexpected subset {other:?}"),
            };
            counts[slot] += 1;
        }
        for c in counts {
            let freq = c as f64 / n as f64;
            // 3 sigma for a multinomial cell at p=1/3 over 30k draws.
            assert!((freq - 1.0 / 3.0).abs() < 0.0082, "freq {freq}");
        }
    }

    #[test]
    fn marginal_matches_enumeration() {
        let x = Matrix::from_row_slice(5, 2, &[1.0, 0.2, -0.5, 1.0, 2.0, -1.0, 0.3, 0.7, 1.5, 1.1]);
        let k = 3;
        for i in 0..5 {
            let direct: f64 = crate::enumerate::subsets(5, k)
                .filter(|s| s.contains(&i))
                .map(|s| volume_sample_pmf(&x, &SubsetSample::new(s).unwrap()).unwrap())
                .sum();
            let closed = volume_marginal(&x, k, i).unwrap();
            assert_relative_eq!(direct, closed, epsilon = 1e-10);
        }
    }

    #[test]
    fn marginal_of_symmetric_design() {
        let x = x3();
        for i in 0..3 {
            assert_relative_eq!(
                volume_marginal(&x, 2, i).unwrap(),
                2.0 / 3.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn refactorization_path_agrees_with_downdates() {
        // More than REFACTOR_EVERY removals forces at least one rebuild;
        // the run must stay reproducible and well-formed.
        let n = 80;
        let mut data = Vec::with_capacity(n * 2);
        let mut rng = RngState::new(9);
        for _ in 0..n * 2 {
            data.push(rng.uniform() * 2.0 - 1.0);
        }
        let x = Matrix::from_row_slice(n, 2, &data);
        let s = volume_sample(&x, 2, &mut RngState::new(10)).unwrap();
        assert_eq!(s.k(), 2);
        let again = volume_sample(&x, 2, &mut RngState::new(10)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn coupled_sample_keeps_t_inside_s() {
        let x = Matrix::from_row_slice(
            6,
            2,
            &[
                1.0, 0.2, -0.5, 1.0, 2.0, -1.0, 0.3, 0.7, 1.5, 1.1, -0.9, 0.4,
            ],
        );
        let mut rng = RngState::new(21);
        for _ in 0..500 {
            let c = coupled_sample(&x, 3, &mut rng).unwrap();
            assert_eq!(c.volume.k(), 3);
            assert!(c.uniform.k() <= 3);
            for &i in c.uniform.indices() {
                assert!(c.volume.contains(i), "T must be a subset of S");
            }
        }
    }

    #[test]
    fn coupled_sample_mean_rejections_on_tiny_case() {
        // m=4, d=1, k=2: expected rejections are 1/2 + 1/3 = 5/6.
        let x = Matrix::from_row_slice(4, 1, &[1.0, 1.0, 1.0, 1.0]);
        let mut rng = RngState::new(33);
        let n = 60_000;
        let total: u64 = (0..n)
            .map(|_| coupled_sample(&x, 2, &mut rng).unwrap().rejections)
            .sum();
        let mean = total as f64 / n as f64;
        // std of R is ~1.15, so 3 sigma over 60k runs is ~0.014.
        assert!((mean - 5.0 / 6.0).abs() < 0.016, "mean rejections {mean}");
    }
}
