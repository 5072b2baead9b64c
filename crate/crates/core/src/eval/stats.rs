use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;

pub const DEFAULT_PERMUTATIONS: usize = 20_000;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PermutationMode {
    /// Exhaustive when `2^n <= iterations`, sampled otherwise.
    #[default]
    Auto,
    Sampled,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PermutationResult {
    pub p_value: f64,
    /// Sign patterns evaluated, not counting the observed one.
    pub iterations: u64,
    pub exhaustive: bool,
}

/// Largest `n` for which exhaustive enumeration is accepted.
const MAX_EXHAUSTIVE_N: usize = 30;

/// Sum of `±values` with signs taken from `bits` (a set bit flips the sign),
/// in index order. Uses a multiply so every pattern shares the same
/// floating-point operation sequence as the observed sum.
fn signed_sum(values: &[f64], mut next_bits: impl FnMut(usize) -> u64) -> f64 {
    let mut acc = 0.0;
    let mut word = 0u64;
    for (j, v) in values.iter().enumerate() {
        if j % 64 == 0 {
            word = next_bits(j / 64);
        }
        let flip = (word >> (j % 64)) & 1;
        acc += v * (1.0 - 2.0 * flip as f64);
    }
    acc
}

/// One-sided sign-flip permutation test on the mean of `dll`.
///
/// `p = (1 + #{patterns with sum >= observed}) / (1 + patterns)`. Sampled
/// iteration `t` draws its signs from a ChaCha8 stream keyed by `(seed, t)`,
/// so the result is independent of thread scheduling.
pub fn permutation_test(
    dll: &[f64],
    iterations: usize,
    seed: u64,
    mode: PermutationMode,
) -> Result<PermutationResult, EvalError> {
    let n = dll.len();
    if n == 0 {
        return Err(EvalError::EmptyInput);
    }
    if dll.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::InvalidInput("non-finite delta-LL value".into()));
    }
    let fits = n <= MAX_EXHAUSTIVE_N && (1u64 << n) <= iterations as u64;
    let exhaustive = match mode {
        PermutationMode::Auto => fits,
        PermutationMode::Sampled => false,
        PermutationMode::Exhaustive => {
            if n > MAX_EXHAUSTIVE_N {
                return Err(EvalError::InvalidInput(format!(
                    "exhaustive enumeration needs n <= {MAX_EXHAUSTIVE_N}, got {n}"
                )));
            }
            true
        }
    };
    let observed = signed_sum(dll, |_| 0);
    let (hits, total): (u64, u64) = if exhaustive {
        let patterns = 1u64 << n;
        let hits = (0..patterns)
            .into_par_iter()
            .filter(|&bits| signed_sum(dll, |_| bits) >= observed)
            .count() as u64;
        (hits, patterns)
    } else {
        let hits = (0..iterations as u64)
            .into_par_iter()
            .filter(|&t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t);
                signed_sum(dll, |_| rng.next_u64()) >= observed
            })
            .count() as u64;
        (hits, iterations as u64)
    };
    Ok(PermutationResult {
        p_value: (1 + hits) as f64 / (1 + total) as f64,
        iterations: total,
        exhaustive,
    })
}

/// Benjamini–Hochberg step-up flags, in input order.
pub fn benjamini_hochberg(p_values: &[f64], alpha: f64) -> Result<Vec<bool>, EvalError> {
    if let Some(&p) = p_values.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(EvalError::InvalidPValue(p));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let cutoff = (1..=m)
        .rev()
        .find(|&k| p_values[order[k - 1]] <= k as f64 * alpha / m as f64)
        .unwrap_or(0);
    let mut flags = vec![false; m];
    for &idx in &order[..cutoff] {
        flags[idx] = true;
    }
    Ok(flags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_gives_one() {
        let r = permutation_test(&[0.0; 40], 500, 1, PermutationMode::Auto).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(!r.exhaustive);
    }

    #[test]
    fn three_ones_exhaustive() {
        let r = permutation_test(&[1.0, 1.0, 1.0], 20_000, 0, PermutationMode::Auto).unwrap();
        assert!(r.exhaustive);
        assert_eq!(r.p_value, 2.0 / 9.0);
    }

    #[test]
    fn sampled_is_seeded() {
        let v: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 - 4.0).collect();
        let a = permutation_test(&v, 2000, 9, PermutationMode::Sampled).unwrap();
        let b = permutation_test(&v, 2000, 9, PermutationMode::Sampled).unwrap();
        assert_eq!(a, b);
        let c = permutation_test(&v, 2000, 10, PermutationMode::Sampled).unwrap();
        assert!(a.p_value > 0.0 && c.p_value > 0.0);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(
            permutation_test(&[], 10, 0, PermutationMode::Auto),
            Err(EvalError::EmptyInput)
        );
    }

    #[test]
    fn bh_examples() {
        assert_eq!(
            benjamini_hochberg(&[0.01, 0.02, 0.03, 0.04], 0.05).unwrap(),
            vec![true; 4]
        );
        assert_eq!(
            benjamini_hochberg(&[0.9, 0.8], 0.05).unwrap(),
            vec![false; 2]
        );
        assert_eq!(
            benjamini_hochberg(&[0.01, 0.9], 0.05).unwrap(),
            vec![true, false]
        );
        assert_eq!(
            benjamini_hochberg(&[0.04, 0.039, 0.2, 0.001], 0.05).unwrap(),
            vec![false, false, false, true]
        );
        // step-up: 0.03 fails its own rank but is carried by 0.04 at rank 3
        assert_eq!(
            benjamini_hochberg(&[0.03, 0.04, 0.035, 0.5], 0.08).unwrap(),
            vec![true, true, true, false]
        );
        assert!(benjamini_hochberg(&[0.0], 0.05).is_err());
        assert!(benjamini_hochberg(&[], 0.05).unwrap().is_empty());
    }
}
