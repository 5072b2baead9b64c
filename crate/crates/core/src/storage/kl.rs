use std::collections::HashMap;

use super::StorageError;
use crate::prob_backends::{Support, TokenDistribution};

/// `KL(p ‖ q) = Σ_x p(x) log2(p(x) / q(x))` in bits, with `0 · log 0 = 0`.
///
/// When either side is a top-k distribution the comparison is made on the
/// coarse partition {entries listed by both} ∪ {REST}, REST absorbing every
/// other outcome on each side. Callers should propagate
/// [`TokenDistribution::is_approximate`] for such pairs.
pub fn kl_divergence_bits(
    p: &TokenDistribution,
    q: &TokenDistribution,
) -> Result<f64, StorageError> {
    if p.vocab_size() != q.vocab_size() {
        return Err(StorageError::Mismatch(format!(
            "vocabulary sizes {} and {}",
            p.vocab_size(),
            q.vocab_size()
        )));
    }
    if p.base() != q.base() {
        return Err(StorageError::Mismatch("log bases differ".into()));
    }
    match (p.support(), q.support()) {
        (Support::Dense(_), Support::Dense(_)) => {
            let (lp, _) = p.listed_log2();
            let (lq, _) = q.listed_log2();
            let mut total = 0.0;
            for ((x, a), (_, b)) in lp.iter().zip(&lq) {
                total += kl_term_log2(*a, *b, *x)?;
            }
            Ok(total)
        }
        _ => lumped_kl(p, q),
    }
}

fn kl_term_log2(log_p: f64, log_q: f64, outcome: usize) -> Result<f64, StorageError> {
    if log_p == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if log_q == f64::NEG_INFINITY {
        return Err(StorageError::InfiniteDivergence(outcome));
    }
    Ok(log_p.exp2() * (log_p - log_q))
}

fn lumped_kl(p: &TokenDistribution, q: &TokenDistribution) -> Result<f64, StorageError> {
    let (lp, declared_p) = p.listed_log2();
    let (lq, declared_q) = q.listed_log2();
    let p_map: HashMap<usize, f64> = lp.iter().copied().collect();
    let q_map: HashMap<usize, f64> = lq.iter().copied().collect();
    let mut shared: Vec<(usize, f64, f64)> = lp
        .iter()
        .filter_map(|&(x, a)| q_map.get(&x).map(|b| (x, a, *b)))
        .collect();
    shared.sort_by_key(|(x, _, _)| *x);
    let mut total = 0.0;
    for &(x, a, b) in &shared {
        total += kl_term_log2(a, b, x)?;
    }
    // REST is the declared tail plus whatever the other side does not list,
    // so it is exactly zero when nothing was lumped.
    let unshared = |listed: &[(usize, f64)], other: &HashMap<usize, f64>| {
        let mut tail: Vec<f64> = listed
            .iter()
            .filter(|(x, _)| !other.contains_key(x))
            .map(|(_, l)| l.exp2())
            .collect();
        tail.sort_by(f64::total_cmp);
        tail.into_iter().fold(0.0, |a, b| a + b)
    };
    let rest_p = declared_p + unshared(&lp, &q_map);
    let rest_q = declared_q + unshared(&lq, &p_map);
    if rest_p > 0.0 {
        if rest_q <= 0.0 {
            return Err(StorageError::InfiniteDivergence(usize::MAX));
        }
        total += rest_p * (rest_p.log2() - rest_q.log2());
    }
    Ok(total)
}

/// KL divergence in bits between plain probability vectors.
pub fn kl_bits_probs(p: &[f64], q: &[f64]) -> Result<f64, StorageError> {
    if p.len() != q.len() {
        return Err(StorageError::Mismatch(format!(
            "lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    let mut total = 0.0;
    for (x, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Err(StorageError::InfiniteDivergence(x));
        }
        total += a * (a.log2() - b.log2());
    }
    Ok(total)
}
