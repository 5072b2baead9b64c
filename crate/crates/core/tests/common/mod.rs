#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storecost::eval::{baseline_formula, storage_terms, PredictorTable};

pub fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Standard normal predictors over `n` rows in ten texts, with
/// `target = 300 + baseline signal + effect * z(info_stor) + N(0, sigma)`.
pub fn synthetic_table(n: usize, effect: f64, sigma: f64, seed: u64) -> PredictorTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let text_id = (0..n).map(|r| format!("text{}", r % 10)).collect();
    let word_index = (0..n as i64).map(|r| r / 10 + 1).collect();
    let mut table = PredictorTable::new(text_id, word_index);
    let names: Vec<String> = baseline_formula()
        .into_iter()
        .chain(storage_terms("dlt_stor"))
        .chain(storage_terms("info_stor"))
        .collect();
    let mut cols = Vec::new();
    for name in &names {
        cols.push((
            name.clone(),
            (0..n).map(|_| normal(&mut rng)).collect::<Vec<f64>>(),
        ));
    }
    let info = &cols.iter().find(|c| c.0 == "info_stor").unwrap().1;
    let mean = info.iter().sum::<f64>() / n as f64;
    let sd = (info.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let baseline: Vec<&Vec<f64>> = cols
        .iter()
        .filter(|c| baseline_formula().contains(&c.0))
        .map(|c| &c.1)
        .collect();
    table.rt_target = (0..n)
        .map(|r| {
            let base: f64 = baseline
                .iter()
                .enumerate()
                .map(|(j, c)| 0.3 * (j as f64 + 1.0) * c[r])
                .sum();
            300.0 + base + effect * (info[r] - mean) / sd + sigma * normal(&mut rng)
        })
        .collect();
    for (name, values) in cols {
        table.set_column(&name, values);
    }
    table.sort_canonical();
    table
}

/// BH by its counting characterisation: reject every `p <= alpha * R / m`
/// where `R` is the largest `r` with at least `r` p-values at or below
/// `alpha * r / m`.
pub fn bh_oracle(p: &[f64], alpha: f64) -> Vec<bool> {
    let m = p.len();
    let r = (1..=m)
        .filter(|&r| {
            p.iter()
                .filter(|&&x| x <= alpha * r as f64 / m as f64)
                .count()
                >= r
        })
        .max()
        .unwrap_or(0);
    p.iter()
        .map(|&x| r > 0 && x <= alpha * r as f64 / m as f64)
        .collect()
}

/// Exhaustive sign-flip p-value, summing in index order.
pub fn sign_flip_oracle(v: &[f64]) -> f64 {
    let n = v.len();
    let observed = v.iter().fold(0.0, |a, x| a + x);
    let mut hits = 0u64;
    for bits in 0u64..1 << n {
        let s = v.iter().enumerate().fold(
            0.0,
            |a, (i, x)| if bits >> i & 1 == 1 { a - x } else { a + x },
        );
        if s >= observed {
            hits += 1;
        }
    }
    (1 + hits) as f64 / (1 + (1u64 << n)) as f64
}

use storecost::dlt::{parse_conllu_str, DependencyTree, ExclusionSet};

pub const HAND_TREES: &str = include_str!("../data/hand_trees.conllu");

/// Trees from the hand-enumerated fixture with their exclusion set and
/// expected per-token counts.
pub fn hand_trees() -> Vec<(DependencyTree, ExclusionSet, Vec<u32>)> {
    let trees = parse_conllu_str(HAND_TREES).expect("fixture parses");
    let blocks: Vec<&str> = HAND_TREES
        .split("\n\n")
        .filter(|b| b.contains("# expected"))
        .collect();
    assert_eq!(blocks.len(), trees.len());
    trees
        .into_iter()
        .zip(blocks)
        .map(|(tree, block)| {
            let field = |key: &str| {
                block.lines().find_map(|l| {
                    l.strip_prefix("# ")?
                        .strip_prefix(key)?
                        .strip_prefix(" =")
                        .map(str::trim)
                })
            };
            let expected = field("expected")
                .unwrap()
                .split_whitespace()
                .map(|c| c.parse().unwrap())
                .collect();
            let excluded = field("exclude").map_or_else(ExclusionSet::default, ExclusionSet::parse);
            (tree, excluded, expected)
        })
        .collect()
}

/// The definition read literally: at each k, the unseen tokens with a kept
/// arc to some seen token.
pub fn dlt_brute_force(t: &DependencyTree, excluded: &ExclusionSet) -> Vec<u32> {
    let n = t.tokens.len();
    let arcs: Vec<(usize, usize)> = t
        .tokens
        .iter()
        .enumerate()
        .filter(|(_, tok)| tok.head != 0 && !excluded.excludes(&tok.deprel))
        .map(|(d, tok)| (d, tok.head - 1))
        .collect();
    (0..n)
        .map(|k| {
            (k + 1..n)
                .filter(|&u| {
                    arcs.iter()
                        .any(|&(a, b)| (a == u && b <= k) || (b == u && a <= k))
                })
                .count() as u32
        })
        .collect()
}

use storecost::prob_backends::{ExactJointModel, Vocabulary};

pub fn decode(mut idx: usize, v: usize, n: usize) -> Vec<usize> {
    let mut seq = vec![0; n];
    for slot in seq.iter_mut().rev() {
        *slot = idx % v;
        idx /= v;
    }
    seq
}

pub fn encode(seq: &[usize], v: usize) -> usize {
    seq.iter().fold(0, |acc, &t| acc * v + t)
}

/// Every sequence of the model's shape, in lexicographic order.
pub fn all_sequences(model: &ExactJointModel) -> impl Iterator<Item = Vec<usize>> + '_ {
    let (v, n) = (model.vocab_size(), model.length());
    (0..v.pow(n as u32)).map(move |idx| decode(idx, v, n))
}

fn agrees(seq: &[usize], sentence: &[usize], k: usize, drop: Option<usize>) -> bool {
    (0..k).all(|j| Some(j) == drop || seq[j] == sentence[j])
}

/// Joint distribution of positions `k..n` given the first `k` words of
/// `sentence`, with position `drop` left free. Built from point
/// probabilities only.
pub fn future_distribution(
    model: &ExactJointModel,
    sentence: &[usize],
    k: usize,
    drop: Option<usize>,
) -> Vec<f64> {
    let (v, n) = (model.vocab_size(), model.length());
    let mut dist = vec![0.0; v.pow((n - k) as u32)];
    for seq in all_sequences(model).filter(|s| agrees(s, sentence, k, drop)) {
        dist[encode(&seq[k..], v)] += model.probability(&seq);
    }
    let z: f64 = dist.iter().sum();
    dist.iter().map(|p| p / z).collect()
}

/// Marginal of position `m` under the same conditioning.
pub fn slot_distribution(
    model: &ExactJointModel,
    sentence: &[usize],
    k: usize,
    drop: Option<usize>,
    m: usize,
) -> Vec<f64> {
    let mut dist = vec![0.0; model.vocab_size()];
    for seq in all_sequences(model).filter(|s| agrees(s, sentence, k, drop)) {
        dist[seq[m]] += model.probability(&seq);
    }
    let z: f64 = dist.iter().sum();
    dist.iter().map(|p| p / z).collect()
}

pub fn kl_bits(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).log2())
        .sum()
}

pub fn oracle_potential(model: &ExactJointModel, sentence: &[usize], i: usize, k: usize) -> f64 {
    kl_bits(
        &future_distribution(model, sentence, k, None),
        &future_distribution(model, sentence, k, Some(i)),
    )
}

pub fn oracle_estimate(model: &ExactJointModel, sentence: &[usize], i: usize, k: usize) -> f64 {
    (k..model.length())
        .map(|m| {
            kl_bits(
                &slot_distribution(model, sentence, k, None, m),
                &slot_distribution(model, sentence, k, Some(i), m),
            )
        })
        .sum()
}

/// A joint whose first `b = ceil(n/2)` words are arbitrary and where each
/// later word depends only on its own parent among them, parents distinct.
/// Returns the model and `b`.
pub fn parented_product(rng: &mut impl Rng, n: usize, v: usize) -> (ExactJointModel, usize) {
    use rand::seq::SliceRandom;
    let b = n.div_ceil(2);
    let mut parents: Vec<usize> = (0..b).collect();
    parents.shuffle(rng);
    let prefix: Vec<f64> = (0..v.pow(b as u32))
        .map(|_| rng.random::<f64>() + 0.05)
        .collect();
    // cond[m - b][parent symbol][symbol]
    let cond: Vec<Vec<Vec<f64>>> = (b..n)
        .map(|_| {
            (0..v)
                .map(|_| {
                    let w: Vec<f64> = (0..v).map(|_| rng.random::<f64>() + 0.05).collect();
                    let z: f64 = w.iter().sum();
                    w.iter().map(|x| x / z).collect()
                })
                .collect()
        })
        .collect();
    let vocab = Vocabulary::new((0..v).map(|t| format!("t{t}"))).unwrap();
    let model = ExactJointModel::from_fn(vocab, n, |seq| {
        let mut w = prefix[encode(&seq[..b], v)];
        for m in b..n {
            w *= cond[m - b][seq[parents[m - b]]][seq[m]];
        }
        w
    })
    .unwrap();
    (model, b)
}
