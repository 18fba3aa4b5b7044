//! Cross-module properties on randomly generated inputs.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use dtinv::dtlearn::{learn, SplitCriterion};
use dtinv::features::{octagon_slopes, transform, SlopeMatrix};
use dtinv::features::{extended_meta, TransformedSample};
use dtinv::formula::{resolve, simplify, Formula, Rel, Term};
use dtinv::io::{formula_from_json, formula_to_json, tree_from_json, tree_to_json};
use dtinv::pac::blumer_bound;
use dtinv::program::{parse, CmpOp, Expr, Pred, State, Stmt, TransitionSystem};
use dtinv::rational::HalfInt;
use dtinv::sampler::{sample, Label, SampleOutcome, SampleSet, SamplerConfig};
use dtinv::verifier::{check_bounded, replay_witness, Verdict};

const NAMES: [&str; 3] = ["x", "y", "z"];

fn var_table(d: usize) -> Vec<String> {
    NAMES[..d].iter().map(|s| s.to_string()).collect()
}

fn expr_strategy(d: usize) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![(-9..=9i64).prop_map(Expr::Lit), (0..d).prop_map(Expr::Var)];
    leaf.prop_recursive(3, 24, 2, move |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (-3..=3i64, inner.clone())
                .prop_map(|(k, a)| Expr::Mul(Box::new(Expr::Lit(k)), Box::new(a))),
            (0..d).prop_map(|v| Expr::Neg(Box::new(Expr::Var(v)))),
            (inner, 2..=9i64).prop_map(|(a, k)| Expr::Mod(Box::new(a), k)),
        ]
    })
}

fn cmp_strategy(d: usize) -> impl Strategy<Value = Pred> {
    let ops = [CmpOp::Le, CmpOp::Lt, CmpOp::Eq, CmpOp::Ne, CmpOp::Ge, CmpOp::Gt];
    (0..ops.len(), expr_strategy(d), expr_strategy(d))
        .prop_map(move |(op, a, b)| Pred::Cmp(ops[op], a, b))
}

fn pred_strategy(d: usize) -> impl Strategy<Value = Pred> {
    let leaf = prop_oneof![
        5 => cmp_strategy(d),
        1 => any::<bool>().prop_map(Pred::Bool),
    ];
    leaf.prop_recursive(2, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Pred::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Pred::Or(Box::new(a), Box::new(b))),
            inner.prop_map(|a| Pred::Not(Box::new(a))),
        ]
    })
}

fn assign_strategy(d: usize) -> impl Strategy<Value = Stmt> {
    (0..d, expr_strategy(d)).prop_map(|(v, e)| Stmt::Assign(v, e))
}

fn block_strategy(d: usize) -> impl Strategy<Value = Stmt> {
    proptest::collection::vec(assign_strategy(d), 1..=2).prop_map(Stmt::Seq)
}

fn body_strategy(d: usize) -> impl Strategy<Value = Stmt> {
    let stmt = prop_oneof![
        3 => assign_strategy(d),
        1 => (pred_strategy(d), block_strategy(d), prop_oneof![
                2 => Just(Stmt::Seq(Vec::new())),
                1 => block_strategy(d),
            ])
            .prop_map(|(c, t, e)| Stmt::If(c, Box::new(t), Box::new(e))),
        1 => (block_strategy(d), block_strategy(d))
            .prop_map(|(a, b)| Stmt::Choice(Box::new(a), Box::new(b))),
    ];
    proptest::collection::vec(stmt, 1..=3).prop_map(Stmt::Seq)
}

fn program_strategy() -> impl Strategy<Value = TransitionSystem> {
    (1..=3usize).prop_flat_map(|d| {
        (pred_strategy(d), pred_strategy(d), body_strategy(d), pred_strategy(d)).prop_map(
            move |(pre, guard, body, post)| TransitionSystem {
                vars: var_table(d),
                pre,
                guard,
                body,
                post,
            },
        )
    })
}

fn term_strategy() -> impl Strategy<Value = Term> {
    prop_oneof![
        Just(Term::Var("x".into())),
        Just(Term::Var("y".into())),
        (2..=4i64).prop_map(|k| Term::Mod { var: "x".into(), modulus: k }),
        Just(Term::product("x", "y")),
    ]
}

fn atom_strategy() -> impl Strategy<Value = Formula> {
    let rels = [Rel::Le, Rel::Gt, Rel::Ge, Rel::Eq, Rel::Ne];
    (
        proptest::collection::vec((-3..=3i64, term_strategy()), 0..=3),
        0..rels.len(),
        -9..=8i64,
        any::<bool>(),
    )
        .prop_map(move |(terms, rel, b, half)| {
            let bound =
                if half { HalfInt::midpoint(b, b + 1) } else { HalfInt::from_int(b) };
            Formula::atom(terms, rels[rel], bound).unwrap()
        })
}

fn formula_strategy() -> impl Strategy<Value = Formula> {
    atom_strategy().prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 2..=3).prop_map(Formula::and),
            proptest::collection::vec(inner.clone(), 2..=3).prop_map(Formula::or),
            inner.prop_map(Formula::not),
        ]
    })
}

fn grid(d: usize, r: i64) -> Vec<State> {
    let mut out = vec![State(vec![])];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|s| {
                (-r..=r).map(move |v| {
                    let mut t = s.0.clone();
                    t.push(v);
                    State(t)
                })
            })
            .collect();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn programs_round_trip_through_display(ts in program_strategy()) {
        let text = ts.to_string();
        let back = parse(&text).unwrap();
        prop_assert_eq!(back, ts, "display output was:\n{}", text);
    }

    #[test]
    fn sampling_is_deterministic_and_disjoint(
        name in prop::sample::select(vec!["antidiag.inv", "conj.inv", "mod2.inv", "choice.inv"]),
        seed in any::<u64>(),
    ) {
        let path = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("benchmarks")
            .join(name);
        let ts = parse(&std::fs::read_to_string(path).unwrap()).unwrap();
        let config = SamplerConfig { seed, ..SamplerConfig::default() };
        let first = sample(&ts, &config);
        let second = sample(&ts, &config);
        prop_assert_eq!(format!("{first:?}"), format!("{second:?}"));
        if let Ok(SampleOutcome::Labeled(set)) = first {
            let good: BTreeSet<_> = set.good.iter().collect();
            let bad: BTreeSet<_> = set.bad.iter().collect();
            prop_assert!(good.intersection(&bad).next().is_none());
            prop_assert!(!set.good.is_empty() || !set.bad.is_empty());
        }
    }

    #[test]
    fn transform_matches_row_by_row_dot_products(
        d in 1..=3usize,
        states in proptest::collection::vec(
            proptest::collection::vec(-50..=50i64, 3),
            1..=20,
        ),
        extra in proptest::collection::vec(proptest::collection::vec(-3..=3i64, 3), 0..=3),
    ) {
        let vars = var_table(d);
        let truncated: Vec<State> =
            states.iter().map(|s| State(s[..d].to_vec())).collect();
        let split = truncated.len() / 2;
        let set = SampleSet {
            vars: vars.clone(),
            good: truncated[..split].to_vec(),
            bad: truncated[split..].to_vec(),
        };
        let mut h = octagon_slopes(d);
        for row in &extra {
            let row = row[..d].to_vec();
            if row.iter().any(|&c| c != 0) && !h.contains(&row) {
                h.push(row);
            }
        }
        let slopes = SlopeMatrix::new(h.clone(), extended_meta(&vars, &[]).unwrap()).unwrap();
        let z = transform(&set, &slopes).unwrap();
        prop_assert_eq!(z.num_features(), h.len());
        for (i, (state, _)) in set.labeled().enumerate() {
            for (j, row) in h.iter().enumerate() {
                let dot: i64 = row.iter().zip(&state.0).map(|(a, b)| a * b).sum();
                prop_assert_eq!(z.z_cols[j][i], dot);
            }
        }
    }

    #[test]
    fn learned_trees_fit_consistent_training_data(
        rows in proptest::collection::vec(
            (proptest::collection::vec(-50..=50i64, 4), any::<bool>()),
            1..=80,
        ),
        criterion in prop_oneof![Just(SplitCriterion::Gini), Just(SplitCriterion::Entropy)],
    ) {
        let mut seen: BTreeMap<Vec<i64>, Label> = BTreeMap::new();
        for (row, good) in &rows {
            seen.entry(row.clone())
                .or_insert(if *good { Label::Good } else { Label::Bad });
        }
        let n = seen.len();
        let z = TransformedSample {
            z_cols: (0..4)
                .map(|j| seen.keys().map(|row| row[j]).collect())
                .collect(),
            labels: seen.values().copied().collect(),
        };
        let tree = learn(&z, criterion, 4 * n + 1).unwrap();
        prop_assert!(tree.node_count() <= 4 * n + 1);
        for (row, label) in seen {
            prop_assert_eq!(tree.classify(&row), label);
        }
    }

    #[test]
    fn simplify_preserves_meaning_on_a_grid(f in formula_strategy()) {
        let vars = var_table(2);
        let before = resolve(&f, &vars).unwrap();
        let after = resolve(&simplify(&f).unwrap(), &vars).unwrap();
        for s in grid(2, 4) {
            prop_assert_eq!(before.eval(&s), after.eval(&s), "diverged at {}", s);
        }
    }

    #[test]
    fn bounded_check_witnesses_replay(
        ts in program_strategy(),
        f in formula_strategy(),
    ) {
        let resolved = match resolve(&f, &ts.vars) {
            Ok(r) => r,
            Err(_) => return Ok(()),
        };
        let verdict = check_bounded(&ts, &resolved, 6).unwrap();
        if !matches!(verdict, Verdict::Valid { .. }) {
            prop_assert!(replay_witness(&ts, &resolved, &verdict).unwrap());
        }
    }

    #[test]
    fn pac_bound_moves_the_right_way(
        eps in 0.02..0.49f64,
        delta in 0.002..0.49f64,
        vc in 1..=100_000u64,
    ) {
        let base = blumer_bound(eps, delta, vc).unwrap();
        prop_assert!(blumer_bound(eps / 2.0, delta, vc).unwrap() >= base);
        prop_assert!(blumer_bound(eps, delta / 2.0, vc).unwrap() >= base);
        prop_assert!(blumer_bound(eps, delta, vc + 1).unwrap() >= base);
        prop_assert!(base >= 1);
    }

    #[test]
    fn half_integers_round_trip_and_order(v in -1000..=1000i64) {
        let whole = HalfInt::from_int(v);
        prop_assert_eq!(whole.to_string().parse::<HalfInt>().unwrap(), whole);
        let mid = HalfInt::midpoint(v, v + 1);
        prop_assert_eq!(mid.to_string().parse::<HalfInt>().unwrap(), mid);
        prop_assert!(whole < mid);
        prop_assert!(mid < HalfInt::from_int(v + 1));
        prop_assert!(mid.to_string().ends_with("/2"));
    }

    #[test]
    fn formulas_round_trip_through_json(f in formula_strategy()) {
        let json = serde_json::to_string(&formula_to_json(&f)).unwrap();
        let back = formula_from_json(&serde_json::from_str(&json).unwrap()).unwrap();
        prop_assert_eq!(back, f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trees_round_trip_through_json(
        rows in proptest::collection::vec(
            (proptest::collection::vec(-20..=20i64, 3), any::<bool>()),
            1..=40,
        ),
    ) {
        let mut seen: BTreeMap<Vec<i64>, Label> = BTreeMap::new();
        for (row, good) in &rows {
            seen.entry(row.clone())
                .or_insert(if *good { Label::Good } else { Label::Bad });
        }
        let z = TransformedSample {
            z_cols: (0..3)
                .map(|j| seen.keys().map(|row| row[j]).collect())
                .collect(),
            labels: seen.values().copied().collect(),
        };
        let tree = learn(&z, SplitCriterion::Gini, 4 * seen.len() + 1).unwrap();
        let json = serde_json::to_string(&tree_to_json(&tree)).unwrap();
        let back = tree_from_json(&serde_json::from_str(&json).unwrap()).unwrap();
        prop_assert_eq!(back, tree);
    }
}
