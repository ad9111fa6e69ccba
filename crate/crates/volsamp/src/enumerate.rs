//! Exhaustive iteration over small index spaces.
//!
//! The brute-force samplers and the verification oracles both walk the full
//! support of a distribution: all sequences in `[n]^k` or all k-element
//! subsets of `[n]`. Iterators here yield index vectors in lexicographic
//! order, allocating one scratch vector per step; supports are capped by the
//! caller before iteration via [`sequence_count`].

/// `n^k` as a u128, or `None` on overflow.
pub fn sequence_count(n: usize, k: usize) -> Option<u128> {
    let mut total: u128 = 1;
    for _ in 0..k {
        total = total.checked_mul(n as u128)?;
    }
    Some(total)
}

/// Binomial coefficient `C(n, k)` as f64 (exact for the small supports used
/// by enumeration, monotone-safe well beyond them).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 1..=k {
        acc *= (n - k + i) as f64 / i as f64;
    }
    acc
}

/// Falling factorial `k (k-1) ... (k-d+1)` as f64; zero when `d > k`.
pub fn falling_factorial(k: usize, d: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..d {
        if i >= k {
            return 0.0;
        }
        acc *= (k - i) as f64;
    }
    acc
}

/// All sequences in `[n]^k` in lexicographic order.
pub fn sequences(n: usize, k: usize) -> Sequences {
    Sequences {
        n,
        current: vec![0; k],
        done: n == 0 && k > 0,
    }
}

pub struct Sequences {
    n: usize,
    current: Vec<usize>,
    done: bool,
}

impl Iterator for Sequences {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let item = self.current.clone();
        // Odometer increment from the last position.
        let mut pos = self.current.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.current[pos] += 1;
            if self.current[pos] < self.n {
                break;
            }
            self.current[pos] = 0;
        }
        Some(item)
    }
}

/// All k-element subsets of `[n]` in lexicographic order, each sorted
/// ascending.
pub fn subsets(n: usize, k: usize) -> Subsets {
    Subsets {
        n,
        current: (0..k).collect(),
        done: k > n,
    }
}

pub struct Subsets {
    n: usize,
    current: Vec<usize>,
    done: bool,
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let item = self.current.clone();
        let k = self.current.len();
        if k == 0 {
            self.done = true;
            return Some(item);
        }
        // Advance the rightmost element that can still move.
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.current[i] < self.n - (k - i) {
                self.current[i] += 1;
                for j in (i + 1)..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                break;
            }
        }
        Some(item)
    }
}

/// Decodes sequence number `rank` (counting lexicographically) into its
/// index vector; inverse of the enumeration order of [`sequences`].
pub fn decode_sequence(rank: u128, n: usize, k: usize) -> Vec<usize> {
    let mut digits = vec![0usize; k];
    let mut r = rank;
    for pos in (0..k).rev() {
        digits[pos] = (r % n as u128) as usize;
        r /= n as u128;
    }
    digits
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_count_matches_pow() {
        assert_eq!(sequence_count(3, 4), Some(81));
        assert_eq!(sequence_count(10, 6), Some(1_000_000));
        assert_eq!(sequence_count(2, 200), None);
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(6, 3), 20.0);
        assert_eq!(binomial(4, 0), 1.0);
        assert_eq!(binomial(3, 5), 0.0);
    }

    #[test]
    fn falling_factorial_values() {
        assert_eq!(falling_factorial(4, 2), 12.0);
        assert_eq!(falling_factorial(2, 1), 2.0);
        assert_eq!(falling_factorial(3, 0), 1.0);
        assert_eq!(falling_factorial(1, 2), 0.0);
    }

    #[test]
    fn sequences_enumerate_lexicographically() {
        let all: Vec<_> = sequences(2, 2).collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(sequences(3, 4).count(), 81);
        assert_eq!(sequences(5, 0).count(), 1);
    }

    #[test]
    fn subsets_enumerate_lexicographically() {
        let all: Vec<_> = subsets(4, 2).collect();
        assert_eq!(
            all,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(subsets(6, 3).count(), 20);
        assert_eq!(subsets(3, 4).count(), 0);
        assert_eq!(subsets(3, 0).count(), 1);
    }

    #[test]
    fn decode_inverts_enumeration_order() {
        for (rank, seq) in sequences(3, 3).enumerate() {
            assert_eq!(decode_sequence(rank as u128, 3, 3), seq);
        }
    }
}
