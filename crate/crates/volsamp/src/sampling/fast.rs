//! Sketched variant of the determinantal rejection sampler.
//!
//! Replaces the exact Gram matrix with a Gaussian-sketch approximation `A`
//! satisfying `(1-eps) X^T X <= A <= (1+eps) X^T X`, and the exact leverage
//! scores with weak estimates, while still producing an exactly rescaled
//! sample: the inner rejection step corrects the weak proposal scores to
//! `l̂_i = x_i^T A^{-1} x_i`, and the outer determinant ratio is taken
//! against `det(A)`, so the output law is rescaled sampling with
//! `q̂_i = l̂_i / sum_j l̂_j`. The returned importance weights `d / l̂_i`
//! differ from `1/q̂_i` by a constant factor, which cancels in the weighted
//! least-squares estimator.
//!
//! The outer ratio is at most one unconditionally (the trace of the sketch-
//! whitened weighted Gram is exactly d, so AM-GM bounds its determinant by
//! `det(A)`), and with `s = max(k, 8 d^2)` proposals and eps within the
//! [`epsilon_limit`] bound the expected ratio is at least 3/4.

use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{
    gram_factorize, leverage_scores_with, logdet_spd, quad_form_row, Matrix, Vector,
};
use crate::rng::RngState;
use crate::sampling::{
    clamp_probability, volume_sample, RescalingDistribution, SampleSequence, MAX_TRIALS,
};

/// Largest epsilon the determinant acceptance bound tolerates at dimension
/// d, from `eps/(1-eps) <= 1/(16 d)`.
pub fn epsilon_limit(d: usize) -> f64 {
    1.0 / (16.0 * d as f64 + 1.0)
}

/// Gaussian sketch row count for a `(1±eps)` spectral approximation of the
/// Gram matrix at dimension d.
pub fn sketch_rows(d: usize, epsilon: f64) -> usize {
    (20.0 * d as f64 * ((d + 1) as f64).ln() / (epsilon * epsilon)).ceil() as usize
}

/// Where the weak leverage estimates come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeakScores {
    /// Exact leverage scores.
    Exact,
    /// Exact scores perturbed by i.i.d. uniform factors in `[lo, hi]`;
    /// exercises the rejection correction in tests.
    Noisy { lo: f64, hi: f64 },
    /// Scores from a second, coarse `(1±1/4)` sketch, giving the required
    /// factor-of-two accuracy without touching the exact Gram matrix.
    Sketched,
}

/// Options for [`FastLeveragedSampler`].
#[derive(Debug, Clone, Copy)]
pub struct FastSamplerOptions {
    /// Spectral accuracy of the sketched Gram matrix; `0` uses the exact
    /// Gram matrix (no sketch).
    pub epsilon: f64,
    pub weak: WeakScores,
    pub max_trials: usize,
}

impl FastSamplerOptions {
    /// Exact Gram matrix when `epsilon == 0`, sketched Gram and sketched
    /// weak scores otherwise.
    pub fn for_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            weak: if epsilon == 0.0 {
                WeakScores::Exact
            } else {
                WeakScores::Sketched
            },
            max_trials: MAX_TRIALS,
        }
    }
}

/// Trace of one sketched-sampler draw.
#[derive(Debug, Clone)]
pub struct FastTrace {
    /// Raw outer determinant ratios, one per proposal, before clamping.
    pub outer_ratios: Vec<f64>,
    /// Largest inner-loop Bernoulli parameter observed (mathematically at
    /// most one when the weak scores have factor-of-two accuracy).
    pub max_inner_param: f64,
}

/// Walker/Vose alias table: O(1) draws from a fixed discrete distribution,
/// one uniform per draw, after O(n) construction. Kept in-house so the draw
/// sequence behind a pinned seed is fixed by this crate, not by a
/// dependency's internals.
#[derive(Debug, Clone)]
struct AliasTable {
    /// Acceptance threshold of each slot, in [0, 1].
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    /// `weights` must be finite and positive; they need not be normalized.
    fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        debug_assert!(n > 0 && n <= u32::MAX as usize);
        let total: f64 = weights.iter().sum();
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut prob = vec![1.0f64; n];
        let mut alias: Vec<u32> = (0..n).map(|i| i as u32).collect();
        let mut small: Vec<u32> = Vec::new();
        let mut large: Vec<u32> = Vec::new();
        for (i, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push(i as u32);
            } else {
                large.push(i as u32);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            let (si, li) = (s as usize, l as usize);
            prob[si] = scaled[si];
            alias[si] = l;
            scaled[li] -= 1.0 - scaled[si];
            if scaled[li] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Entries left on either worklist hold a full slot up to roundoff;
        // their prob stays 1, making them self-aliasing.
        Self { prob, alias }
    }

    fn draw(&self, rng: &mut RngState) -> usize {
        let n = self.prob.len();
        let u = rng.uniform() * n as f64;
        let i = (u as usize).min(n - 1);
        if u - (i as f64) < self.prob[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }
}

/// Rejection sampler operating on a sketched Gram matrix and weak leverage
/// estimates. Construction pays the sketch cost once; each [`Self::sample`]
/// call then does O(1) work per proposal regardless of n.
#[derive(Debug, Clone)]
pub struct FastLeveragedSampler {
    epsilon: f64,
    max_trials: usize,
    log_det_a: f64,
    /// `l̂_i = x_i^T A^{-1} x_i` for every row.
    hat: Vec<f64>,
    /// Weak estimates driving the proposal distribution.
    tilde: Vec<f64>,
    proposal: AliasTable,
    /// Everything a draw needs per row, packed contiguously: the d features,
    /// then `l̂_i`, `l̃_i`, and the composition scale `1/sqrt(q̂_i)`. One
    /// proposal touches one slice here instead of several n-sized arrays.
    packed: Vec<f64>,
    stride: usize,
}

impl FastLeveragedSampler {
    pub fn new(x: &Matrix, options: FastSamplerOptions, rng: &mut RngState) -> Result<Self> {
        let (n, d) = x.shape();
        let limit = epsilon_limit(d);
        if !(0.0..=limit).contains(&options.epsilon) {
            return Err(Error::InvalidEpsilon {
                epsilon: options.epsilon,
                limit,
            });
        }
        let fact = gram_factorize(x)?;
        let exact_scores = leverage_scores_with(x, &fact)?;

        let (a_inv, log_det_a) = if options.epsilon == 0.0 {
            (fact.inverse().clone(), fact.log_det())
        } else {
            let a = sketched_gram(x, sketch_rows(d, options.epsilon), rng);
            verify_containment(&a, &fact, options.epsilon)?;
            invert_spd(&a)?
        };

        let hat: Vec<f64> = if options.epsilon == 0.0 {
            exact_scores.clone()
        } else {
            (0..n).map(|i| quad_form_row(&a_inv, x, i)).collect()
        };

        let tilde: Vec<f64> = match options.weak {
            WeakScores::Exact => exact_scores,
            WeakScores::Noisy { lo, hi } => {
                if !(0.0 < lo && lo <= hi) {
                    return Err(Error::InvalidDistribution {
                        reason: format!("noise range [{lo}, {hi}] is not positive"),
                    });
                }
                exact_scores
                    .iter()
                    .map(|&l| l * (lo + (hi - lo) * rng.uniform()))
                    .collect()
            }
            WeakScores::Sketched => {
                let coarse_eps = 0.25;
                let a2 = sketched_gram(x, sketch_rows(d, coarse_eps), rng);
                verify_containment(&a2, &fact, coarse_eps)?;
                let (a2_inv, _) = invert_spd(&a2)?;
                (0..n).map(|i| quad_form_row(&a2_inv, x, i)).collect()
            }
        };

        // Normalizing first reuses the positivity validation.
        let q_tilde = RescalingDistribution::normalized(tilde.clone())?;
        let proposal = AliasTable::new(q_tilde.weights());
        let q_hat = RescalingDistribution::normalized(hat.clone())?;
        let stride = d + 3;
        let mut packed = Vec::with_capacity(n * stride);
        for i in 0..n {
            for c in 0..d {
                packed.push(x[(i, c)]);
            }
            packed.push(hat[i]);
            packed.push(tilde[i]);
            packed.push(1.0 / q_hat.weight(i).sqrt());
        }
        Ok(Self {
            epsilon: options.epsilon,
            max_trials: options.max_trials,
            log_det_a,
            hat,
            tilde,
            proposal,
            packed,
            stride,
        })
    }

    /// `l̂` scores the sampler rescales by.
    pub fn hat_scores(&self) -> &[f64] {
        &self.hat
    }

    /// Weak scores driving the proposals.
    pub fn tilde_scores(&self) -> &[f64] {
        &self.tilde
    }

    pub fn sample(&self, x: &Matrix, k: usize, rng: &mut RngState) -> Result<SampleSequence> {
        self.sample_traced(x, k, rng).map(|(seq, _)| seq)
    }

    /// Draws one size-k rescaled sample, returning acceptance diagnostics.
    pub fn sample_traced(
        &self,
        x: &Matrix,
        k: usize,
        rng: &mut RngState,
    ) -> Result<(SampleSequence, FastTrace)> {
        let d = x.ncols();
        if x.nrows() != self.hat.len() {
            return Err(Error::ShapeMismatch {
                reason: format!(
                    "sampler built for {} rows, got {}",
                    self.hat.len(),
                    x.nrows()
                ),
            });
        }
        if k < d {
            return Err(Error::InvalidSize {
                reason: format!("sequence size k={k} is below the column dimension d={d}"),
            });
        }
        let s = k.max(8 * d * d);
        let stride = self.stride;
        let mut ratios = Vec::new();
        let mut max_inner: f64 = 0.0;
        let mut proposal = vec![0usize; s];
        // Rows rescaled by 1/sqrt(q̂) and their output weights, filled in the
        // same pass as the weighted Gram so each row is gathered exactly once.
        let mut rescaled = Matrix::zeros(s, d);
        let mut weights = vec![0.0f64; s];
        let mut accepted = false;

        'outer: for _ in 0..self.max_trials {
            let mut weighted = Matrix::zeros(d, d);
            let inv_s = 1.0 / s as f64;
            for (t, slot) in proposal.iter_mut().enumerate() {
                let i = self.propose_row(rng, &mut max_inner)?;
                *slot = i;
                let row = &self.packed[i * stride..(i + 1) * stride];
                let hat = row[d];
                let scale = row[d + 2];
                let wt = inv_s * d as f64 / hat;
                for a in 0..d {
                    let ra = wt * row[a];
                    for b in 0..d {
                        weighted[(a, b)] += ra * row[b];
                    }
                }
                for c in 0..d {
                    rescaled[(t, c)] = row[c] * scale;
                }
                weights[t] = d as f64 / hat;
            }
            let ratio = match logdet_spd(&weighted) {
                None => 0.0,
                Some(logdet) => (logdet - self.log_det_a).exp(),
            };
            ratios.push(ratio);
            if rng.bernoulli(clamp_probability(ratio)) {
                accepted = true;
                break 'outer;
            }
        }
        if !accepted {
            return Err(Error::NonConvergence {
                trials: self.max_trials,
            });
        }

        // Composition inlined from compose_subsample, reusing the gathered
        // rows: volume-sample k of the s rescaled rows, keep their source
        // indices and weights in position order.
        let positions = volume_sample(&rescaled, k, rng)?;
        let indices = positions.indices().iter().map(|&t| proposal[t]).collect();
        let out_weights = positions.indices().iter().map(|&t| weights[t]).collect();
        let reduced = SampleSequence::new(indices, out_weights)?;
        Ok((
            reduced,
            FastTrace {
                outer_ratios: ratios,
                max_inner_param: max_inner,
            },
        ))
    }

    /// Inner rejection: proposes from the weak scores and thins down to the
    /// `l̂` distribution with parameter `(1-eps) l̂_i / (2 l̃_i)`.
    fn propose_row(&self, rng: &mut RngState, max_inner: &mut f64) -> Result<usize> {
        let score_at = self.stride - 3;
        for _ in 0..self.max_trials {
            let i = self.proposal.draw(rng);
            let off = i * self.stride + score_at;
            let p = (1.0 - self.epsilon) * self.packed[off] / (2.0 * self.packed[off + 1]);
            if p > *max_inner {
                *max_inner = p;
            }
            if rng.bernoulli(clamp_probability(p)) {
                return Ok(i);
            }
        }
        Err(Error::NonConvergence {
            trials: self.max_trials,
        })
    }
}

/// One-call convenience wrapper: builds the sampler (sketching when
/// `epsilon > 0`) and draws a single sample.
pub fn fast_leveraged_volume_sample(
    x: &Matrix,
    k: usize,
    epsilon: f64,
    rng: &mut RngState,
) -> Result<SampleSequence> {
    let sampler = FastLeveragedSampler::new(x, FastSamplerOptions::for_epsilon(epsilon), rng)?;
    sampler.sample(x, k, rng)
}

/// `A = (G X)^T (G X)` for a Gaussian `m x n` sketch G with entries
/// `N(0, 1/m)`, accumulated row by row so G is never materialized.
fn sketched_gram(x: &Matrix, m: usize, rng: &mut RngState) -> Matrix {
    let (n, d) = x.shape();
    let scale = 1.0 / (m as f64).sqrt();
    let mut a = Matrix::zeros(d, d);
    let mut y = Vector::zeros(d);
    for _ in 0..m {
        y.fill(0.0);
        for i in 0..n {
            let g: f64 = rand::Rng::sample(rng, StandardNormal);
            let gi = g * scale;
            for c in 0..d {
                y[c] += gi * x[(i, c)];
            }
        }
        for a_idx in 0..d {
            for b_idx in 0..d {
                a[(a_idx, b_idx)] += y[a_idx] * y[b_idx];
            }
        }
    }
    a
}

/// Checks `(1-eps) X^T X <= A <= (1+eps) X^T X` by whitening with the exact
/// factorization; at desk scale the guarantee is verified, not assumed.
fn verify_containment(
    a: &Matrix,
    fact: &crate::linalg::GramFactorization,
    epsilon: f64,
) -> Result<()> {
    let whitened = fact.inv_sqrt() * a * fact.inv_sqrt();
    let sym = (&whitened + whitened.transpose()).scale(0.5);
    let eigs = sym.symmetric_eigenvalues();
    let lo = eigs.min();
    let hi = eigs.max();
    if lo < 1.0 - epsilon || hi > 1.0 + epsilon {
        return Err(Error::SketchFailure {
            epsilon,
            observed_min: lo,
            observed_max: hi,
        });
    }
    Ok(())
}

fn invert_spd(a: &Matrix) -> Result<(Matrix, f64)> {
    let chol = nalgebra::Cholesky::new(a.clone()).ok_or(Error::RankDeficient {
        ratio: 0.0,
        hint: "sketched Gram matrix is not positive definite",
    })?;
    let log_det = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>();
    Ok((chol.inverse(), log_det))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::leverage_scores;
    use approx::assert_relative_eq;

    fn x42() -> Matrix {
        Matrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, -1.0])
    }

    #[test]
    fn epsilon_limit_matches_definition() {
        let d = 3;
        let e = epsilon_limit(d);
        assert_relative_eq!(e / (1.0 - e), 1.0 / (16.0 * d as f64), epsilon = 1e-12);
    }

    #[test]
    fn rejects_epsilon_beyond_limit() {
        let x = x42();
        let mut rng = RngState::new(1);
        let opts = FastSamplerOptions::for_epsilon(0.5);
        assert!(matches!(
            FastLeveragedSampler::new(&x, opts, &mut rng),
            Err(Error::InvalidEpsilon { .. })
        ));
    }

    #[test]
    fn exact_mode_reproduces_leverage_scores() {
        let x = x42();
        let mut rng = RngState::new(2);
        let sampler =
            FastLeveragedSampler::new(&x, FastSamplerOptions::for_epsilon(0.0), &mut rng).unwrap();
        let scores = leverage_scores(&x).unwrap();
        for (a, b) in sampler.hat_scores().iter().zip(&scores) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn exact_mode_inner_param_is_half() {
        let x = x42();
        let mut rng = RngState::new(3);
        let sampler =
            FastLeveragedSampler::new(&x, FastSamplerOptions::for_epsilon(0.0), &mut rng).unwrap();
        let (seq, trace) = sampler.sample_traced(&x, 2, &mut rng).unwrap();
        assert_eq!(seq.k(), 2);
        assert_relative_eq!(trace.max_inner_param, 0.5, epsilon = 1e-12);
        assert!(trace.outer_ratios.iter().all(|&r| r <= 1.0 + 1e-9));
    }

    #[test]
    fn noisy_scores_keep_inner_param_below_one() {
        let x = x42();
        let mut rng = RngState::new(4);
        let opts = FastSamplerOptions {
            epsilon: 0.0,
            weak: WeakScores::Noisy { lo: 0.75, hi: 1.25 },
            max_trials: MAX_TRIALS,
        };
        let sampler = FastLeveragedSampler::new(&x, opts, &mut rng).unwrap();
        for _ in 0..200 {
            let (_, trace) = sampler.sample_traced(&x, 2, &mut rng).unwrap();
            assert!(trace.max_inner_param <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn sketched_mode_small_dimension() {
        let x = x42();
        let mut rng = RngState::new(5);
        let eps = epsilon_limit(2);
        let sampler =
            FastLeveragedSampler::new(&x, FastSamplerOptions::for_epsilon(eps), &mut rng).unwrap();
        // Sketched scores stay within the containment bands of the truth.
        let scores = leverage_scores(&x).unwrap();
        for (hat, exact) in sampler.hat_scores().iter().zip(&scores) {
            assert!(*hat >= exact / (1.0 + eps) - 1e-9);
            assert!(*hat <= exact / (1.0 - eps) + 1e-9);
        }
        let (seq, trace) = sampler.sample_traced(&x, 3, &mut rng).unwrap();
        assert_eq!(seq.k(), 3);
        assert!(trace.max_inner_param <= 1.0 + 1e-12);
        assert!(trace.outer_ratios.iter().all(|&r| r <= 1.0 + 1e-9));
    }

    #[test]
    fn weights_are_dim_over_hat() {
        let x = x42();
        let mut rng = RngState::new(6);
        let sampler =
            FastLeveragedSampler::new(&x, FastSamplerOptions::for_epsilon(0.0), &mut rng).unwrap();
        let (seq, _) = sampler.sample_traced(&x, 2, &mut rng).unwrap();
        for (&i, &w) in seq.indices().iter().zip(seq.rescale_weights()) {
            assert_relative_eq!(w, 2.0 / sampler.hat_scores()[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn convenience_wrapper_is_reproducible() {
        let x = x42();
        let a = fast_leveraged_volume_sample(&x, 2, 0.0, &mut RngState::new(7)).unwrap();
        let b = fast_leveraged_volume_sample(&x, 2, 0.0, &mut RngState::new(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn containment_check_rejects_bad_gram() {
        let x = x42();
        let fact = gram_factorize(&x).unwrap();
        let bad = fact.gram().scale(2.0);
        assert!(matches!(
            verify_containment(&bad, &fact, 0.01),
            Err(Error::SketchFailure { .. })
        ));
        assert!(verify_containment(fact.gram(), &fact, 0.01).is_ok());
    }

    #[test]
    fn alias_table_preserves_slot_mass() {
        // Summing each slot's kept mass and its alias contributions must
        // recover the normalized weights exactly up to roundoff.
        let weights = [0.1, 0.4, 0.05, 0.25, 0.2];
        let table = AliasTable::new(&weights);
        let n = weights.len();
        let mut mass = vec![0.0f64; n];
        for i in 0..n {
            mass[i] += table.prob[i] / n as f64;
            mass[table.alias[i] as usize] += (1.0 - table.prob[i]) / n as f64;
        }
        for (m, w) in mass.iter().zip(&weights) {
            assert_relative_eq!(m, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn alias_table_matches_empirical_frequencies() {
        let weights = [2.0, 1.0, 5.0, 2.0];
        let table = AliasTable::new(&weights);
        let mut rng = RngState::new(8);
        let draws = 100_000usize;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[table.draw(&mut rng)] += 1;
        }
        let total: f64 = weights.iter().sum();
        for (c, w) in counts.iter().zip(&weights) {
            let p = w / total;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((*c as f64 / draws as f64 - p).abs() < 5.0 * se);
        }
    }

    #[test]
    fn alias_table_handles_uniform_and_point_mass() {
        let uniform = AliasTable::new(&[1.0; 7]);
        assert!(uniform.prob.iter().all(|&p| (p - 1.0).abs() < 1e-12));
        let spiked = AliasTable::new(&[1e-12, 1.0]);
        let mut rng = RngState::new(9);
        let hits = (0..1000).filter(|_| spiked.draw(&mut rng) == 1).count();
        assert_eq!(hits, 1000);
    }
}
