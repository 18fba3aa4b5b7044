//! Acceptance suite. Each criterion prints one pass/fail line; the process
//! exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dtinv::dtlearn::{conditional_impurity, learn, node_impurity, Node, SplitCriterion};
use dtinv::features::{extended_meta, octagon_slopes, transform, AugmentTerm, SlopeMatrix};
use dtinv::formula::{dt_to_form, resolve, simplify, Formula, Rel, Term};
use dtinv::io::TransformedJson;
use dtinv::pac::{blumer_bound, dt_vc_bound, sample_size_for};
use dtinv::pipeline::{infer_invariant, AugmentPolicy, InferOutcome, PipelineConfig};
use dtinv::program::{eval, parse, step, CmpOp, Expr, Pred, State, Stmt, TransitionSystem};
use dtinv::rational::HalfInt;
use dtinv::sampler::{sample, Label, SampleOutcome, SampleSet, SamplerConfig};
use dtinv::verifier::{check_bounded, Verdict};

fn benchmark(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("benchmarks").join(name)
}

fn load(name: &str) -> TransitionSystem {
    parse(&std::fs::read_to_string(benchmark(name)).unwrap()).unwrap()
}

fn labeled_rows(z: &dtinv::features::TransformedSample) -> Vec<(Vec<i64>, Label)> {
    (0..z.num_rows())
        .map(|i| (z.z_cols.iter().map(|c| c[i]).collect(), z.labels[i]))
        .collect()
}

/// 1. On the anti-diagonal program the tree splits on x + y at -1/2 and
/// then 1/2, the simplified formula is exactly `x + y != 0`, and bounded
/// checking at radius 50 validates it in under a second.
fn golden_path() {
    let ts = load("antidiag.inv");
    let set = match sample(&ts, &SamplerConfig::default()).unwrap() {
        SampleOutcome::Labeled(s) => s,
        other => panic!("unexpected sampling outcome {other:?}"),
    };
    let meta = extended_meta(&ts.vars, &[]).unwrap();
    let slopes = SlopeMatrix::new(octagon_slopes(meta.len()), meta).unwrap();
    let z = transform(&set, &slopes).unwrap();
    let tree = learn(&z, SplitCriterion::Gini, 63).unwrap();
    let root = match &tree.root {
        Node::Inner { split, right, .. } => {
            assert_eq!(split.feature, 3, "root must split on x + y");
            assert_eq!(split.threshold, HalfInt::midpoint(-1, 0));
            right
        }
        leaf => panic!("root is a leaf: {leaf:?}"),
    };
    match root.as_ref() {
        Node::Inner { split, .. } => {
            assert_eq!(split.feature, 3, "right child must split on x + y");
            assert_eq!(split.threshold, HalfInt::midpoint(0, 1));
        }
        leaf => panic!("right child is a leaf: {leaf:?}"),
    }
    let f = simplify(&dt_to_form(&tree, &slopes).unwrap()).unwrap();
    assert_eq!(f.to_string(), "x + y != 0");
    let resolved = resolve(&f, &ts.vars).unwrap();
    let start = Instant::now();
    let verdict = check_bounded(&ts, &resolved, 50).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(verdict, Verdict::Valid { bound: 50 });
    assert!(elapsed < Duration::from_secs(1), "verification took {elapsed:?}");
}

/// 2. The displayed matrix product reproduces bit-exactly: (0,1) maps to
/// (0,1,-1,1) and (2,-2) to (2,-2,4,0).
fn transform_fidelity() {
    let vars = vec!["x".to_string(), "y".to_string()];
    let set = SampleSet {
        vars: vars.clone(),
        good: vec![State(vec![0, 1])],
        bad: vec![State(vec![2, -2])],
    };
    let meta = extended_meta(&vars, &[]).unwrap();
    let slopes = SlopeMatrix::new(octagon_slopes(2), meta).unwrap();
    let z = transform(&set, &slopes).unwrap();
    let rows = TransformedJson::from(&z);
    assert_eq!(rows.z, vec![vec![0, 1, -1, 1], vec![2, -2, 4, 0]]);
    assert_eq!(rows.labels, vec![Label::Good, Label::Bad]);
}

/// 3. octagon_slopes(d) is exactly the canonical rows of {-1,0,1}^d with
/// one or two nonzero entries, d * d of them, for d up to 6.
fn slope_counts() {
    for d in 1..=6usize {
        let rows = octagon_slopes(d);
        assert_eq!(rows.len(), d * d, "octagon row count at d={d}");
        let as_set: BTreeSet<Vec<i64>> = rows.iter().cloned().collect();
        assert_eq!(as_set.len(), rows.len(), "duplicate octagon rows at d={d}");
        let mut brute: BTreeSet<Vec<i64>> = BTreeSet::new();
        for code in 0..3usize.pow(d as u32) {
            let mut v = Vec::with_capacity(d);
            let mut rest = code;
            for _ in 0..d {
                v.push((rest % 3) as i64 - 1);
                rest /= 3;
            }
            let nonzero = v.iter().filter(|&&c| c != 0).count();
            if nonzero == 0 || nonzero > 2 {
                continue;
            }
            if v.iter().find(|&&c| c != 0).copied().unwrap() < 0 {
                for c in &mut v {
                    *c = -*c;
                }
            }
            brute.insert(v);
        }
        assert_eq!(as_set, brute, "octagon rows disagree with brute force at d={d}");
    }
}

/// 4. Perfect splits score 0 under both criteria; a 50/50 node scores
/// 1 bit of entropy and gini 0.5. All to 1e-12.
fn impurity_identities() {
    let tol = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let nl = rng.gen_range(1..=10);
        let nr = rng.gen_range(1..=10);
        let left_label = if rng.gen_bool(0.5) { Label::Good } else { Label::Bad };
        let right_label = if left_label == Label::Good { Label::Bad } else { Label::Good };
        let cut = rng.gen_range(-50..=50i64);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..nl {
            values.push(cut - i);
            labels.push(left_label);
        }
        for i in 0..nr {
            values.push(cut + 1 + i);
            labels.push(right_label);
        }
        let t = HalfInt::midpoint(cut, cut + 1);
        for criterion in [SplitCriterion::Gini, SplitCriterion::Entropy] {
            let got = conditional_impurity(criterion, &values, &labels, t).unwrap();
            assert!(got.abs() < tol, "perfect split scored {got} under {criterion:?}");
        }
    }
    assert!((node_impurity(SplitCriterion::Entropy, 7, 7) - 1.0).abs() < tol);
    assert!((node_impurity(SplitCriterion::Gini, 7, 7) - 0.5).abs() < tol);
}

fn random_state(rng: &mut ChaCha8Rng, d: usize, r: i64) -> State {
    State((0..d).map(|_| rng.gen_range(-r..=r)).collect())
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

/// 5. Over 200 random samples at d <= 4, n <= 500: the learned tree
/// classifies every training row, the converted formula agrees with the
/// tree on every sampled state, and simplification preserves truth on the
/// whole [-8,8]^d grid.
fn tree_formula_sample_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for round in 0..200 {
        let d = rng.gen_range(1..=4);
        let structured = round % 10 != 9;
        let n = if structured { rng.gen_range(1..=500) } else { rng.gen_range(1..=30) };
        let vars: Vec<String> = (0..d).map(|i| format!("v{i}")).collect();
        let meta = extended_meta(&vars, &[]).unwrap();
        let h = octagon_slopes(d);
        let mut label_of: Box<dyn FnMut(&State) -> Label> = if structured {
            let w = h[rng.gen_range(0..h.len())].clone();
            let c = rng.gen_range(-8..=8i64);
            Box::new(move |s: &State| {
                let dot: i64 = w.iter().zip(&s.0).map(|(a, b)| a * b).sum();
                if dot <= c {
                    Label::Good
                } else {
                    Label::Bad
                }
            })
        } else {
            let mut assigned: BTreeMap<State, Label> = BTreeMap::new();
            let mut flip = ChaCha8Rng::seed_from_u64(round as u64);
            Box::new(move |s: &State| {
                *assigned.entry(s.clone()).or_insert_with(|| {
                    if flip.gen_bool(0.5) {
                        Label::Good
                    } else {
                        Label::Bad
                    }
                })
            })
        };
        let mut good = BTreeSet::new();
        let mut bad = BTreeSet::new();
        for _ in 0..n {
            let s = random_state(&mut rng, d, 8);
            match label_of(&s) {
                Label::Good => good.insert(s),
                Label::Bad => bad.insert(s),
            };
        }
        if good.is_empty() && bad.is_empty() {
            continue;
        }
        let set = SampleSet {
            vars: vars.clone(),
            good: good.into_iter().collect(),
            bad: bad.into_iter().collect(),
        };
        let slopes = SlopeMatrix::new(h.clone(), meta.clone()).unwrap();
        let z = transform(&set, &slopes).unwrap();
        let criterion =
            if rng.gen_bool(0.5) { SplitCriterion::Gini } else { SplitCriterion::Entropy };
        let tree = learn(&z, criterion, 4001).unwrap();
        for (row, label) in labeled_rows(&z) {
            assert_eq!(tree.classify(&row), label, "tree misclassifies a training row");
        }
        let f = dt_to_form(&tree, &slopes).unwrap();
        let resolved = resolve(&f, &vars).unwrap();
        for (state, label) in set.labeled() {
            assert_eq!(
                resolved.eval(state),
                label == Label::Good,
                "formula disagrees with tree on {state}"
            );
        }
        let simplified = simplify(&f).unwrap();
        let rs = resolve(&simplified, &vars).unwrap();
        for s in grid(d, 8) {
            assert_eq!(resolved.eval(&s), rs.eval(&s), "simplify changed truth at {s}");
        }
    }
}

fn rand_expr(rng: &mut ChaCha8Rng, d: usize) -> Expr {
    let mut e = Expr::Lit(rng.gen_range(-4..=4));
    for _ in 0..rng.gen_range(0..=2) {
        let v = Expr::Var(rng.gen_range(0..d));
        let c: i64 = rng.gen_range(-2..=2);
        let term = if c == 1 {
            v
        } else {
            Expr::Mul(Box::new(Expr::Lit(c)), Box::new(v))
        };
        e = if rng.gen_bool(0.5) {
            Expr::Add(Box::new(e), Box::new(term))
        } else {
            Expr::Sub(Box::new(e), Box::new(term))
        };
    }
    e
}

fn rand_cmp(rng: &mut ChaCha8Rng, d: usize) -> Pred {
    let ops = [CmpOp::Le, CmpOp::Lt, CmpOp::Eq, CmpOp::Ne, CmpOp::Ge, CmpOp::Gt];
    Pred::Cmp(ops[rng.gen_range(0..ops.len())], rand_expr(rng, d), rand_expr(rng, d))
}

fn rand_pred(rng: &mut ChaCha8Rng, d: usize, depth: usize) -> Pred {
    if depth == 0 || rng.gen_bool(0.5) {
        return rand_cmp(rng, d);
    }
    match rng.gen_range(0..3) {
        0 => Pred::And(
            Box::new(rand_pred(rng, d, depth - 1)),
            Box::new(rand_pred(rng, d, depth - 1)),
        ),
        1 => Pred::Or(
            Box::new(rand_pred(rng, d, depth - 1)),
            Box::new(rand_pred(rng, d, depth - 1)),
        ),
        _ => Pred::Not(Box::new(rand_pred(rng, d, depth - 1))),
    }
}

fn rand_body(rng: &mut ChaCha8Rng, d: usize) -> Stmt {
    let mut stmts = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        let s = match rng.gen_range(0..4) {
            0 | 1 => Stmt::Assign(rng.gen_range(0..d), rand_expr(rng, d)),
            2 => Stmt::If(
                rand_cmp(rng, d),
                Box::new(Stmt::Assign(rng.gen_range(0..d), rand_expr(rng, d))),
                Box::new(Stmt::Seq(vec![])),
            ),
            _ => Stmt::Choice(
                Box::new(Stmt::Assign(rng.gen_range(0..d), rand_expr(rng, d))),
                Box::new(Stmt::Assign(rng.gen_range(0..d), rand_expr(rng, d))),
            ),
        };
        stmts.push(s);
    }
    Stmt::Seq(stmts)
}

fn rand_formula(rng: &mut ChaCha8Rng, vars: &[String], depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.4) {
        let mut terms = Vec::new();
        for v in vars {
            let c: i64 = rng.gen_range(-2..=2);
            if c != 0 {
                terms.push((c, Term::Var(v.clone())));
            }
        }
        let rels = [Rel::Le, Rel::Gt, Rel::Ge, Rel::Eq, Rel::Ne];
        let rel = rels[rng.gen_range(0..rels.len())];
        let bound = if rng.gen_bool(0.3) {
            HalfInt::midpoint(rng.gen_range(-6..=5), rng.gen_range(-6..=5))
        } else {
            HalfInt::from_int(rng.gen_range(-6..=6))
        };
        return Formula::atom(terms, rel, bound).unwrap();
    }
    match rng.gen_range(0..3) {
        0 => Formula::and(vec![
            rand_formula(rng, vars, depth - 1),
            rand_formula(rng, vars, depth - 1),
        ]),
        1 => Formula::or(vec![
            rand_formula(rng, vars, depth - 1),
            rand_formula(rng, vars, depth - 1),
        ]),
        _ => Formula::not(rand_formula(rng, vars, depth - 1)),
    }
}

/// Literal three-pass scan re-implemented with nested loops, kept
/// deliberately independent of the library's box enumeration.
fn naive_verdict(
    ts: &TransitionSystem,
    f: &dtinv::formula::ResolvedFormula,
    b: i64,
) -> Verdict {
    let d = ts.dim();
    let axis = |active: bool| -> Vec<i64> {
        if active {
            (-b..=b).collect()
        } else {
            vec![0]
        }
    };
    let mut states = Vec::new();
    for x in axis(d >= 1) {
        for y in axis(d >= 2) {
            for z in axis(d >= 3) {
                let mut v = vec![x];
                if d >= 2 {
                    v.push(y);
                }
                if d >= 3 {
                    v.push(z);
                }
                states.push(State(v));
            }
        }
    }
    for s in &states {
        if eval(&ts.pre, s).unwrap() && !f.eval(s) {
            return Verdict::InitViolation { state: s.clone() };
        }
    }
    for s in &states {
        if f.eval(s) && eval(&ts.guard, s).unwrap() {
            for t in step(ts, s).unwrap() {
                if !f.eval(&t) {
                    return Verdict::InductionViolation { state: s.clone(), successor: t };
                }
            }
        }
    }
    for s in &states {
        if f.eval(s) && !eval(&ts.guard, s).unwrap() && !eval(&ts.post, s).unwrap() {
            return Verdict::SafetyViolation { state: s.clone() };
        }
    }
    Verdict::Valid { bound: b }
}

/// 6. On 50 random (program, formula) pairs at d <= 3 the bounded checker
/// agrees with the naive re-implementation on status and witness.
fn verifier_oracle_agreement() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for pair in 0..50 {
        let d = rng.gen_range(1..=3);
        let vars: Vec<String> = ["x", "y", "z"][..d].iter().map(|s| s.to_string()).collect();
        let ts = TransitionSystem {
            vars: vars.clone(),
            pre: rand_pred(&mut rng, d, 1),
            guard: rand_pred(&mut rng, d, 1),
            body: rand_body(&mut rng, d),
            post: rand_pred(&mut rng, d, 1),
        };
        let f = rand_formula(&mut rng, &vars, 2);
        let resolved = resolve(&f, &vars).unwrap();
        let got = check_bounded(&ts, &resolved, 8).unwrap();
        let want = naive_verdict(&ts, &resolved, 8);
        assert_eq!(got, want, "checker disagrees with naive scan on pair {pair}");
    }
}

fn atoms_of(f: &Formula) -> Vec<&dtinv::formula::Atom> {
    match f {
        Formula::True | Formula::False => vec![],
        Formula::Atom(a) => vec![a],
        Formula::And(parts) | Formula::Or(parts) => parts.iter().flat_map(atoms_of).collect(),
        Formula::Not(inner) => atoms_of(inner),
    }
}

/// 7. The parity benchmark yields a verified invariant mentioning x mod 2;
/// the square benchmark one containing s = i*i. Each within 30 seconds.
fn nonlinear_features() {
    let start = Instant::now();
    let ts = load("mod2.inv");
    let result = infer_invariant(&ts, "mod2", &PipelineConfig::default()).unwrap();
    let formula = match result.outcome {
        InferOutcome::Verified { formula, .. } => formula,
        other => panic!("parity benchmark not verified: {other:?}"),
    };
    assert!(
        atoms_of(&formula).iter().any(|a| {
            a.terms
                .iter()
                .any(|(_, t)| matches!(t, Term::Mod { var, modulus } if var == "x" && *modulus == 2))
        }),
        "no x mod 2 atom in {formula}"
    );
    assert!(start.elapsed() < Duration::from_secs(30));

    let start = Instant::now();
    let ts = load("square.inv");
    let config = PipelineConfig {
        augment: AugmentPolicy::Explicit(vec![AugmentTerm::Square("i".into())]),
        ..Default::default()
    };
    let result = infer_invariant(&ts, "square", &config).unwrap();
    let formula = match result.outcome {
        InferOutcome::Verified { formula, .. } => formula,
        other => panic!("square benchmark not verified: {other:?}"),
    };
    let wanted = |a: &&dtinv::formula::Atom| {
        a.rel == Rel::Eq
            && a.bound == HalfInt::from_int(0)
            && a.terms
                == vec![
                    (1, Term::Var("s".into())),
                    (-1, Term::product("i", "i")),
                ]
    };
    assert!(
        atoms_of(&formula).iter().any(wanted),
        "no s = i*i atom in {formula}"
    );
    assert!(start.elapsed() < Duration::from_secs(30));
}

/// 8. With 16 features, learner time at n=100k is at most 3x its time at
/// n=50k and under 10 seconds.
fn learning_scalability() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let vars: Vec<String> = (0..4).map(|i| format!("v{i}")).collect();
    let meta = extended_meta(&vars, &[]).unwrap();
    let slopes = SlopeMatrix::new(octagon_slopes(4), meta).unwrap();
    let mut good = Vec::new();
    let mut bad = Vec::new();
    while good.len() + bad.len() < 100_000 {
        let s = random_state(&mut rng, 4, 1000);
        if s.0[0] + s.0[1] <= 17 {
            good.push(s);
        } else {
            bad.push(s);
        }
    }
    let full = SampleSet { vars: vars.clone(), good, bad };
    let half = SampleSet {
        vars: vars.clone(),
        good: full.good.iter().take(full.good.len() / 2).cloned().collect(),
        bad: full.bad.iter().take(full.bad.len() / 2).cloned().collect(),
    };
    let z_full = transform(&full, &slopes).unwrap();
    let z_half = transform(&half, &slopes).unwrap();
    let time_learn = |z: &dtinv::features::TransformedSample| {
        let mut best = Duration::MAX;
        for _ in 0..3 {
            let start = Instant::now();
            let tree = learn(z, SplitCriterion::Gini, 63).unwrap();
            best = best.min(start.elapsed());
            assert!(tree.node_count() >= 3);
        }
        best
    };
    let t_half = time_learn(&z_half);
    let t_full = time_learn(&z_full);
    assert!(t_full < Duration::from_secs(10), "n=100k learning took {t_full:?}");
    assert!(
        t_full.as_secs_f64() <= 3.0 * t_half.as_secs_f64().max(0.001),
        "n=100k took {t_full:?}, more than 3x the {t_half:?} at n=50k"
    );
}

/// 9. Bound calculators match an independently arranged evaluation of the
/// same expressions within the ceiling boundary, over 1000 random queries.
fn pac_calculator() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let oracle = |eps: f64, delta: f64, vc: u64| -> u64 {
        let t1 = (4.0 * (2.0 / delta).ln()) / eps;
        let t2 = (8.0 * vc as f64) * ((13.0 / eps).ln() / eps);
        t1.max(t2).ceil() as u64
    };
    for _ in 0..1000 {
        let eps = rng.gen_range(0.01..0.5);
        let delta = rng.gen_range(0.001..0.5);
        let vc = rng.gen_range(1..=1_000_000u64);
        let got = blumer_bound(eps, delta, vc).unwrap();
        let want = oracle(eps, delta, vc);
        assert!(
            got.abs_diff(want) <= 1,
            "blumer bound {got} vs oracle {want} at eps={eps} delta={delta} vc={vc}"
        );
    }
    for _ in 0..200 {
        let eps = rng.gen_range(0.01..0.5);
        let delta = rng.gen_range(0.001..0.5);
        let k = rng.gen_range(2..=1023usize);
        let dim = rng.gen_range(1..=64usize);
        let vc = dt_vc_bound(k, dim).unwrap();
        let vc_oracle = ((k * dim) as f64 * (k as f64).log2()).ceil() as u64;
        assert!(vc.abs_diff(vc_oracle) <= 1, "vc bound {vc} vs oracle {vc_oracle}");
        let got = sample_size_for(eps, delta, k, dim).unwrap();
        let want = oracle(eps, delta, vc);
        assert!(got.abs_diff(want) <= 1, "sample size {got} vs oracle {want}");
    }
}

fn main() {
    let criteria: Vec<(&str, fn())> = vec![
        ("golden path", golden_path),
        ("transform fidelity", transform_fidelity),
        ("slope counts", slope_counts),
        ("impurity identities", impurity_identities),
        ("tree/formula/sample consistency", tree_formula_sample_consistency),
        ("verifier oracle agreement", verifier_oracle_agreement),
        ("nonlinear features", nonlinear_features),
        ("learning scalability", learning_scalability),
        ("PAC calculator", pac_calculator),
    ];
    let mut failures = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        match catch_unwind(AssertUnwindSafe(criterion)) {
            Ok(()) => println!("criterion {} ({name}): pass", i + 1),
            Err(cause) => {
                failures += 1;
                let msg = cause
                    .downcast_ref::<String>()
                    .map(String::as_str)
                    .or_else(|| cause.downcast_ref::<&str>().copied())
                    .unwrap_or("panic");
                println!("criterion {} ({name}): FAIL ({msg})", i + 1);
            }
        }
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
