mod common;

use common::{bh_oracle, sign_flip_oracle, synthetic_table};
use proptest::prelude::*;
use storecost::eval::{
    benjamini_hochberg, cv_delta_ll, cv_delta_ll_on, permutation_test, run_conditions, Condition,
    CvConfig, FoldScheme, PermutationMode, PredictorTable, RegressConfig,
};

fn p_value() -> impl Strategy<Value = f64> {
    // a coarse grid half the time so that ties and boundary hits occur
    prop_oneof![(1u32..=40).prop_map(|k| k as f64 / 400.0), 1e-6f64..=1.0]
}

fn info_formulas() -> (Vec<String>, Vec<String>) {
    Condition::Info.formulas()
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

proptest! {
    #[test]
    fn bh_matches_counting_definition(p in prop::collection::vec(p_value(), 1..=20), alpha in 0.001f64..0.5) {
        prop_assert_eq!(benjamini_hochberg(&p, alpha).unwrap(), bh_oracle(&p, alpha));
    }

    #[test]
    fn bh_is_monotone_in_alpha(p in prop::collection::vec(p_value(), 1..=20), a in 0.001f64..0.5, b in 0.001f64..0.5) {
        let (lo, hi) = (a.min(b), a.max(b));
        let strict = benjamini_hochberg(&p, lo).unwrap();
        let loose = benjamini_hochberg(&p, hi).unwrap();
        for (s, l) in strict.iter().zip(&loose) {
            prop_assert!(!s || *l);
        }
    }

    #[test]
    fn exhaustive_permutation_matches_enumeration(
        v in prop::collection::vec(prop_oneof![(-8i32..=8).prop_map(|k| k as f64 / 4.0), -3.0f64..3.0], 1..=12),
    ) {
        let r = permutation_test(&v, 1 << 12, 0, PermutationMode::Auto).unwrap();
        prop_assert!(r.exhaustive);
        prop_assert_eq!(r.p_value, sign_flip_oracle(&v));
    }

    #[test]
    fn mirrored_vectors_cover_the_unit_interval(v in prop::collection::vec(-3.0f64..3.0, 1..=10)) {
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let p = permutation_test(&v, 1 << 10, 0, PermutationMode::Exhaustive).unwrap().p_value;
        let q = permutation_test(&neg, 1 << 10, 0, PermutationMode::Exhaustive).unwrap().p_value;
        prop_assert!(p + q >= 1.0 - 1e-12);
        prop_assert!(p > 0.0 && p <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pooled_mean_is_fold_weighted(seed in any::<u64>(), n in 500usize..700) {
        let table = synthetic_table(n, 0.5, 1.0, seed);
        let (b, a) = info_formulas();
        let out = cv_delta_ll(&table, &strs(&b), &strs(&a), &CvConfig { seed, ..CvConfig::default() }).unwrap();
        let total: usize = out.folds.iter().map(|f| f.n_test).sum();
        prop_assert_eq!(total, n);
        let weighted = out.folds.iter().map(|f| f.mean_dll * f.n_test as f64).sum::<f64>() / n as f64;
        prop_assert!((weighted - out.mean_dll).abs() < 1e-9);
        let mean = out.per_word_dll.iter().sum::<f64>() / n as f64;
        prop_assert!((mean - out.mean_dll).abs() < 1e-12);
    }

    #[test]
    fn held_out_rows_do_not_influence_each_other(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let table = synthetic_table(500, 0.5, 1.0, seed);
        let (b, a) = info_formulas();
        let rows: Vec<usize> = (0..table.len()).collect();
        let cfg = CvConfig { seed, ..CvConfig::default() };
        let before = cv_delta_ll_on(&table, &rows, &strs(&b), &strs(&a), &cfg).unwrap();
        let r = pick.index(rows.len());
        let fold = before.fold_of[r];

        let mut edited = table.clone();
        edited.rt_target[r] += 250.0;
        let mut info = edited.column("info_stor").unwrap().to_vec();
        info[r] *= -7.0;
        edited.set_column("info_stor", info);
        let after = cv_delta_ll_on(&edited, &rows, &strs(&b), &strs(&a), &cfg).unwrap();
        prop_assert_eq!(&after.fold_of, &before.fold_of);
        for j in 0..rows.len() {
            if before.fold_of[j] == fold && j != r {
                prop_assert_eq!(after.per_word_dll[j], before.per_word_dll[j]);
            }
        }
    }
}

fn shuffled_tsv(table: &PredictorTable, seed: u64) -> String {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let text = table.to_tsv();
    let mut lines: Vec<&str> = text.lines().collect();
    let header = lines.remove(0);
    lines.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    std::iter::once(header)
        .chain(lines)
        .map(|l| format!("{l}\n"))
        .collect()
}

#[test]
fn input_row_order_never_matters() {
    let table = synthetic_table(520, 0.4, 1.0, 11);
    let config = RegressConfig {
        permutations: 2000,
        ..RegressConfig::default()
    };
    let reference = serde_json::to_string(&run_conditions(&table, &config).unwrap()).unwrap();
    for s in 0..3 {
        let reparsed = PredictorTable::from_tsv(&shuffled_tsv(&table, s)).unwrap();
        let again = serde_json::to_string(&run_conditions(&reparsed, &config).unwrap()).unwrap();
        assert_eq!(again, reference);
    }
}

#[test]
fn same_seed_same_report_across_schemes() {
    let table = synthetic_table(600, 0.4, 1.0, 12);
    for scheme in [FoldScheme::Rows, FoldScheme::Texts] {
        let config = RegressConfig {
            cv: CvConfig {
                seed: 9,
                scheme,
                ..CvConfig::default()
            },
            permutations: 2000,
            ..RegressConfig::default()
        };
        let a = serde_json::to_string(&run_conditions(&table, &config).unwrap()).unwrap();
        let b = serde_json::to_string(&run_conditions(&table, &config).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn noise_predictor_is_not_significant() {
    let table = synthetic_table(600, 0.0, 1.0, 13);
    let report = run_conditions(&table, &RegressConfig::default()).unwrap();
    let info = report
        .results
        .iter()
        .find(|r| r.condition == Condition::Info)
        .unwrap();
    assert!(info.mean_dll.abs() < 0.02, "{}", info.mean_dll);
    assert!(!info.bh_significant);
}

#[test]
fn sampled_mode_is_seeded_and_close_to_exhaustive() {
    let v: Vec<f64> = (0..14).map(|i| ((i * 7 % 5) as f64 - 1.5) * 0.3).collect();
    let exact = sign_flip_oracle(&v);
    let a = permutation_test(&v, 20_000, 3, PermutationMode::Sampled).unwrap();
    let b = permutation_test(&v, 20_000, 3, PermutationMode::Sampled).unwrap();
    assert_eq!(a, b);
    assert!(!a.exhaustive);
    let se = (exact * (1.0 - exact) / 20_000.0).sqrt();
    assert!(
        (a.p_value - exact).abs() < 5.0 * se + 1e-4,
        "{} vs {exact}",
        a.p_value
    );
}
