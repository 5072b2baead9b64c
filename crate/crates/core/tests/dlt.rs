mod common;

use common::{dlt_brute_force, hand_trees};
use proptest::prelude::*;
use storecost::dlt::{
    dlt_storage, parse_conllu_str, write_conllu, DependencyTree, ExclusionSet, TreeToken,
};

fn tree(rows: &[(&str, usize, &str)]) -> DependencyTree {
    DependencyTree {
        sentence_id: "t".into(),
        text: None,
        tokens: rows
            .iter()
            .map(|(f, h, d)| TreeToken {
                form: f.to_string(),
                head: *h,
                deprel: d.to_string(),
                misc: "_".into(),
            })
            .collect(),
        multiword: vec![],
    }
}

#[test]
fn hand_enumerated_trees() {
    let cases = hand_trees();
    assert_eq!(cases.len(), 10);
    for (t, ex, expected) in &cases {
        assert_eq!(&dlt_storage(t, ex).per_token, expected, "{}", t.sentence_id);
        assert_eq!(&dlt_brute_force(t, ex), expected);
    }
}

#[test]
fn subtype_exclusion_with_custom_set() {
    let t = tree(&[
        ("It", 3, "nsubj:pass"),
        ("was", 3, "aux:pass"),
        ("eaten", 0, "root"),
    ]);
    assert_eq!(
        dlt_storage(&t, &ExclusionSet::default()).per_token,
        vec![1, 1, 0]
    );
    assert_eq!(
        dlt_storage(&t, &ExclusionSet::parse("root,nsubj:pass")).per_token,
        vec![0, 1, 0]
    );
}

#[test]
fn relative_clause_total_matches_interval_sum() {
    // earliest seen co-dependent of each token: 2<-1, 6<-2, 7<-2, 5<-4, 9<-7
    let t = tree(&[
        ("The", 2, "det"),
        ("reporter", 7, "nsubj"),
        ("who", 6, "obj"),
        ("the", 5, "det"),
        ("senator", 6, "nsubj"),
        ("attacked", 2, "acl:relcl"),
        ("admitted", 0, "root"),
        ("the", 9, "det"),
        ("error", 7, "obj"),
    ]);
    assert_eq!(
        dlt_storage(&t, &ExclusionSet::default()).total(),
        1 + 4 + 5 + 1 + 2
    );
}

const LABELS: [&str; 8] = [
    "nsubj",
    "obj",
    "det",
    "amod",
    "punct",
    "dep",
    "reparandum",
    "obl:tmod",
];

/// Random tree over up to eight tokens: a shuffled insertion order where
/// each new node attaches to an earlier-inserted one.
fn arb_tree() -> impl Strategy<Value = DependencyTree> {
    (1usize..=8)
        .prop_flat_map(|n| {
            (
                Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
                prop::collection::vec(any::<usize>(), n),
                prop::collection::vec(0..LABELS.len(), n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
        .prop_map(|(order, choices, labels, spaces)| {
            let n = order.len();
            let mut head = vec![0usize; n];
            for j in 1..n {
                head[order[j]] = order[choices[j] % j] + 1;
            }
            DependencyTree {
                sentence_id: "p".into(),
                text: None,
                tokens: (0..n)
                    .map(|t| TreeToken {
                        form: format!("w{t}"),
                        head: head[t],
                        deprel: if head[t] == 0 {
                            "root".into()
                        } else {
                            LABELS[labels[t]].into()
                        },
                        misc: if spaces[t] {
                            "_".into()
                        } else {
                            "SpaceAfter=No".into()
                        },
                    })
                    .collect(),
                multiword: vec![],
            }
        })
}

fn arb_exclusions() -> impl Strategy<Value = ExclusionSet> {
    prop::sample::subsequence(LABELS.to_vec(), 0..=LABELS.len()).prop_map(|mut v| {
        v.push("root");
        ExclusionSet::new(v)
    })
}

proptest! {
    #[test]
    fn matches_definition(t in arb_tree(), ex in arb_exclusions()) {
        prop_assert_eq!(dlt_storage(&t, &ex).per_token, dlt_brute_force(&t, &ex));
    }

    #[test]
    fn total_is_sum_of_pending_intervals(t in arb_tree(), ex in arb_exclusions()) {
        let n = t.tokens.len();
        let mut earliest: Vec<Option<usize>> = vec![None; n];
        for (d, tok) in t.tokens.iter().enumerate() {
            if tok.head == 0 || ex.excludes(&tok.deprel) {
                continue;
            }
            let h = tok.head - 1;
            let (lo, hi) = (d.min(h), d.max(h));
            earliest[hi] = Some(earliest[hi].map_or(lo, |e: usize| e.min(lo)));
        }
        let intervals: u64 = earliest.iter().enumerate().filter_map(|(t, e)| e.map(|u| (t - u) as u64)).sum();
        prop_assert_eq!(dlt_storage(&t, &ex).total(), intervals);
    }

    #[test]
    fn excluded_arcs_are_inert(t in arb_tree(), attach in any::<usize>(), label in 0usize..4) {
        let ex = ExclusionSet::default();
        let before = dlt_storage(&t, &ex).per_token;
        let mut grown = t.clone();
        let n = t.tokens.len();
        grown.tokens.push(TreeToken {
            form: "x".into(),
            head: attach % n + 1,
            deprel: ["punct", "dep", "reparandum", "dep:extra"][label].into(),
            misc: "_".into(),
        });
        let after = dlt_storage(&grown, &ex).per_token;
        prop_assert_eq!(&after[..n], &before[..]);
        prop_assert_eq!(after[n], 0);
    }

    #[test]
    fn relabelling_to_excluded_equals_dropping(t in arb_tree(), pick in any::<usize>()) {
        let n = t.tokens.len();
        let d = pick % n;
        let mut relabelled = t.clone();
        relabelled.tokens[d].deprel = "punct".into();
        let ex = ExclusionSet::default();
        let mut extended = ex.labels().map(String::from).collect::<Vec<_>>();
        extended.push(t.tokens[d].deprel.clone());
        // dropping the arc by excluding its label only agrees when no other arc shares the label
        if t.tokens.iter().filter(|x| x.deprel == t.tokens[d].deprel).count() == 1 {
            prop_assert_eq!(
                dlt_storage(&relabelled, &ex).per_token,
                dlt_storage(&t, &ExclusionSet::new(extended)).per_token
            );
        }
    }

    #[test]
    fn counts_are_bounded(t in arb_tree()) {
        let n = t.tokens.len();
        for (k, &c) in dlt_storage(&t, &ExclusionSet::new(["root"])).per_token.iter().enumerate() {
            prop_assert!((c as usize) < n - k || c == 0);
        }
    }

    #[test]
    fn word_sums_conserve_token_sums(t in arb_tree()) {
        let p = dlt_storage(&t, &ExclusionSet::new(["root"]));
        let words = p.word_align(&t.forms(), &t.surface_text()).unwrap();
        prop_assert_eq!(words.iter().map(|&c| c as u64).sum::<u64>(), p.total());
        prop_assert_eq!(words.len(), t.surface_text().split_whitespace().count());
    }

    #[test]
    fn conllu_round_trips(t in arb_tree()) {
        let back = parse_conllu_str(&write_conllu(std::slice::from_ref(&t))).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(&back[0].tokens, &t.tokens);
        prop_assert_eq!(dlt_storage(&back[0], &ExclusionSet::default()), dlt_storage(&t, &ExclusionSet::default()));
    }
}
