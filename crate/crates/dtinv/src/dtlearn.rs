//! Greedy decision-tree learning over integer feature vectors.
//!
//! Trees split on `z[feature] <= threshold` with half-integer thresholds
//! taken from midpoints of consecutive distinct feature values, so training
//! points never sit on a split boundary. Growth continues to purity under a
//! node budget. Gini scores are compared in exact integer arithmetic to keep
//! tie-breaking deterministic across platforms; entropy uses floating point.
//!
//! Ties are broken toward the lowest feature index, then the smallest
//! threshold. The chosen split is the best one available even when it does
//! not strictly reduce impurity, which is what lets XOR-shaped data learn.

use thiserror::Error;

use crate::features::TransformedSample;
use crate::rational::HalfInt;
use crate::sampler::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitCriterion {
    Gini,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Split {
    pub feature: usize,
    pub threshold: HalfInt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Leaf(Label),
    Inner { split: Split, left: Box<Node>, right: Box<Node> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionTree {
    pub root: Node,
}

impl DecisionTree {
    pub fn classify(&self, z: &[i64]) -> Label {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(label) => return *label,
                Node::Inner { split, left, right } => {
                    node = if split.threshold.admits(z[split.feature]) { left } else { right };
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        fn count(n: &Node) -> usize {
            match n {
                Node::Leaf(_) => 1,
                Node::Inner { left, right, .. } => 1 + count(left) + count(right),
            }
        }
        count(&self.root)
    }

    pub fn depth(&self) -> usize {
        fn depth(n: &Node) -> usize {
            match n {
                Node::Leaf(_) => 0,
                Node::Inner { left, right, .. } => 1 + depth(left).max(depth(right)),
            }
        }
        depth(&self.root)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LearnError {
    #[error("empty sample")]
    EmptySample,
    #[error("node budget exhausted")]
    NodeBudgetExhausted,
    #[error("node budget too small")]
    BudgetTooSmall,
    #[error("sample contains identical feature rows with different labels")]
    InseparableSample,
    #[error("split leaves one side empty")]
    EmptySide,
}

/// Impurity of a node holding `good` and `bad` examples. The empty node has
/// impurity zero.
pub fn node_impurity(criterion: SplitCriterion, good: usize, bad: usize) -> f64 {
    let n = good + bad;
    if n == 0 {
        return 0.0;
    }
    let pg = good as f64 / n as f64;
    let pb = bad as f64 / n as f64;
    match criterion {
        SplitCriterion::Gini => 1.0 - pg * pg - pb * pb,
        SplitCriterion::Entropy => {
            let term = |p: f64| if p == 0.0 { 0.0 } else { -p * p.log2() };
            term(pg) + term(pb)
        }
    }
}

/// Size-weighted impurity of the two sides induced by `z <= threshold` on
/// one feature column.
pub fn conditional_impurity(
    criterion: SplitCriterion,
    values: &[i64],
    labels: &[Label],
    threshold: HalfInt,
) -> Result<f64, LearnError> {
    assert_eq!(values.len(), labels.len(), "values and labels must align");
    let (mut gl, mut bl, mut gr, mut br) = (0usize, 0, 0, 0);
    for (&v, &l) in values.iter().zip(labels) {
        match (threshold.admits(v), l) {
            (true, Label::Good) => gl += 1,
            (true, Label::Bad) => bl += 1,
            (false, Label::Good) => gr += 1,
            (false, Label::Bad) => br += 1,
        }
    }
    let (nl, nr) = (gl + bl, gr + br);
    if nl == 0 || nr == 0 {
        return Err(LearnError::EmptySide);
    }
    let n = (nl + nr) as f64;
    Ok(nl as f64 / n * node_impurity(criterion, gl, bl)
        + nr as f64 / n * node_impurity(criterion, gr, br))
}

/// Split score in a form that compares deterministically. Gini scores are
/// exact rationals; lower is better.
#[derive(Clone, Copy, Debug)]
enum Score {
    Exact { num: i128, den: i128 },
    Approx(f64),
}

impl Score {
    fn strictly_better_than(&self, other: &Score) -> bool {
        match (self, other) {
            (Score::Exact { num: a, den: b }, Score::Exact { num: c, den: d }) => a * d < c * b,
            (Score::Approx(a), Score::Approx(b)) => a < b,
            _ => unreachable!("scores from one search share a criterion"),
        }
    }
}

fn side_score(criterion: SplitCriterion, gl: usize, bl: usize, gr: usize, br: usize) -> Score {
    let (nl, nr) = ((gl + bl) as i128, (gr + br) as i128);
    let n = nl + nr;
    match criterion {
        SplitCriterion::Gini => {
            let (gl, bl, gr, br) = (gl as i128, bl as i128, gr as i128, br as i128);
            let num = nr * (nl * nl - gl * gl - bl * bl) + nl * (nr * nr - gr * gr - br * br);
            Score::Exact { num, den: n * nl * nr }
        }
        SplitCriterion::Entropy => {
            let w = |g: usize, b: usize| {
                (g + b) as f64 / n as f64 * node_impurity(criterion, g, b)
            };
            Score::Approx(w(gl, bl) + w(gr, br))
        }
    }
}

fn best_split_rows(
    data: &TransformedSample,
    rows: &[usize],
    criterion: SplitCriterion,
) -> Option<Split> {
    let mut best: Option<(Split, Score)> = None;
    let (mut g_total, mut b_total) = (0usize, 0usize);
    for &r in rows {
        match data.labels[r] {
            Label::Good => g_total += 1,
            Label::Bad => b_total += 1,
        }
    }
    let mut vals: Vec<(i64, Label)> = Vec::with_capacity(rows.len());
    for (feature, col) in data.z_cols.iter().enumerate() {
        vals.clear();
        vals.extend(rows.iter().map(|&r| (col[r], data.labels[r])));
        vals.sort_unstable_by_key(|&(v, _)| v);
        let (mut gl, mut bl) = (0usize, 0usize);
        for i in 0..vals.len().saturating_sub(1) {
            match vals[i].1 {
                Label::Good => gl += 1,
                Label::Bad => bl += 1,
            }
            if vals[i].0 == vals[i + 1].0 {
                continue;
            }
            let threshold = HalfInt::midpoint(vals[i].0, vals[i + 1].0);
            let score = side_score(criterion, gl, bl, g_total - gl, b_total - bl);
            let candidate = Split { feature, threshold };
            match &best {
                Some((_, cur)) if !score.strictly_better_than(cur) => {}
                _ => best = Some((candidate, score)),
            }
        }
    }
    best.map(|(s, _)| s)
}

/// Best available split over the whole sample, or `None` when every feature
/// is constant.
pub fn best_split(data: &TransformedSample, criterion: SplitCriterion) -> Option<Split> {
    let rows: Vec<usize> = (0..data.num_rows()).collect();
    best_split_rows(data, &rows, criterion)
}

/// Learns a tree consistent with the sample, growing greedily to purity
/// under a budget of `max_nodes` tree nodes.
pub fn learn(
    data: &TransformedSample,
    criterion: SplitCriterion,
    max_nodes: usize,
) -> Result<DecisionTree, LearnError> {
    if data.num_rows() == 0 {
        return Err(LearnError::EmptySample);
    }
    let has_good = data.labels.contains(&Label::Good);
    let has_bad = data.labels.contains(&Label::Bad);
    if max_nodes == 0 || (has_good && has_bad && max_nodes < 3) {
        return Err(LearnError::BudgetTooSmall);
    }

    fn build(
        data: &TransformedSample,
        rows: Vec<usize>,
        criterion: SplitCriterion,
        max_nodes: usize,
        used: &mut usize,
    ) -> Result<Node, LearnError> {
        let good = rows.iter().filter(|&&r| data.labels[r] == Label::Good).count();
        if good == rows.len() {
            return Ok(Node::Leaf(Label::Good));
        }
        if good == 0 {
            return Ok(Node::Leaf(Label::Bad));
        }
        let split =
            best_split_rows(data, &rows, criterion).ok_or(LearnError::InseparableSample)?;
        *used += 2;
        if *used > max_nodes {
            return Err(LearnError::NodeBudgetExhausted);
        }
        let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
        for r in rows {
            if split.threshold.admits(data.z_cols[split.feature][r]) {
                left_rows.push(r);
            } else {
                right_rows.push(r);
            }
        }
        let left = build(data, left_rows, criterion, max_nodes, used)?;
        let right = build(data, right_rows, criterion, max_nodes, used)?;
        Ok(Node::Inner { split, left: Box::new(left), right: Box::new(right) })
    }

    let mut used = 1usize;
    let rows: Vec<usize> = (0..data.num_rows()).collect();
    let root = build(data, rows, criterion, max_nodes, &mut used)?;
    Ok(DecisionTree { root })
}
