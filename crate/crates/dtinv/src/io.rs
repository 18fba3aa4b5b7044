//! JSON wire formats for pipeline stages.
//!
//! Samples and slope matrices serialize directly from their in-memory
//! types. Transformed data, trees, and formulas get explicit wire structs:
//! transformed data is row-major on the wire but column-major in memory,
//! tree thresholds travel as exact strings like "-1/2", and formula terms
//! reuse the feature-column encoding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtlearn::{DecisionTree, Node, Split};
use crate::features::{FeatureMeta, TransformedSample};
use crate::formula::{Atom, Formula, Rel, Term};
use crate::rational::HalfInt;
use crate::sampler::Label;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("bad threshold `{0}`")]
    BadThreshold(String),
    #[error("feature matrix rows have uneven lengths")]
    Ragged,
    #[error("{rows} data rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("bad relation `{0}`")]
    BadRel(String),
}

/// Row-major transformed data: `z[i]` is the feature vector of sample `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformedJson {
    pub z: Vec<Vec<i64>>,
    pub labels: Vec<Label>,
}

impl From<&TransformedSample> for TransformedJson {
    fn from(t: &TransformedSample) -> Self {
        let n = t.num_rows();
        let z = (0..n)
            .map(|i| t.z_cols.iter().map(|col| col[i]).collect())
            .collect();
        TransformedJson { z, labels: t.labels.clone() }
    }
}

impl TryFrom<TransformedJson> for TransformedSample {
    type Error = WireError;

    fn try_from(j: TransformedJson) -> Result<Self, Self::Error> {
        if j.z.len() != j.labels.len() {
            return Err(WireError::LengthMismatch { rows: j.z.len(), labels: j.labels.len() });
        }
        let m = j.z.first().map_or(0, Vec::len);
        if j.z.iter().any(|r| r.len() != m) {
            return Err(WireError::Ragged);
        }
        let mut z_cols = vec![Vec::with_capacity(j.z.len()); m];
        for row in &j.z {
            for (c, v) in z_cols.iter_mut().zip(row) {
                c.push(*v);
            }
        }
        Ok(TransformedSample { z_cols, labels: j.labels })
    }
}

/// Nested tree encoding; leaves are `{"label": ...}` and inner nodes carry
/// an exact threshold string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeJson {
    Inner { feature: usize, threshold: String, left: Box<TreeJson>, right: Box<TreeJson> },
    Leaf { label: Label },
}

pub fn tree_to_json(tree: &DecisionTree) -> TreeJson {
    fn conv(n: &Node) -> TreeJson {
        match n {
            Node::Leaf(label) => TreeJson::Leaf { label: *label },
            Node::Inner { split, left, right } => TreeJson::Inner {
                feature: split.feature,
                threshold: split.threshold.to_string(),
                left: Box::new(conv(left)),
                right: Box::new(conv(right)),
            },
        }
    }
    conv(&tree.root)
}

pub fn tree_from_json(j: &TreeJson) -> Result<DecisionTree, WireError> {
    fn conv(j: &TreeJson) -> Result<Node, WireError> {
        Ok(match j {
            TreeJson::Leaf { label } => Node::Leaf(*label),
            TreeJson::Inner { feature, threshold, left, right } => {
                let t: HalfInt = threshold
                    .parse()
                    .map_err(|_| WireError::BadThreshold(threshold.clone()))?;
                Node::Inner {
                    split: Split { feature: *feature, threshold: t },
                    left: Box::new(conv(left)?),
                    right: Box::new(conv(right)?),
                }
            }
        })
    }
    Ok(DecisionTree { root: conv(j)? })
}

/// Formula encoding tagged by operator; atom terms reuse the feature-column
/// encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum FormulaJson {
    True,
    False,
    Atom { terms: Vec<CoeffTermJson>, rel: String, bound: String },
    And { args: Vec<FormulaJson> },
    Or { args: Vec<FormulaJson> },
    Not { arg: Box<FormulaJson> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffTermJson {
    pub coeff: i64,
    #[serde(flatten)]
    pub term: FeatureMeta,
}

fn term_to_meta(t: &Term) -> FeatureMeta {
    match t {
        Term::Var(v) => FeatureMeta::Var { var: v.clone() },
        Term::Mod { var, modulus } => FeatureMeta::Mod { var: var.clone(), modulus: *modulus },
        Term::Product { left, right } => {
            FeatureMeta::Product { left: left.clone(), right: right.clone() }
        }
    }
}

fn rel_name(rel: Rel) -> &'static str {
    match rel {
        Rel::Le => "le",
        Rel::Gt => "gt",
        Rel::Ge => "ge",
        Rel::Eq => "eq",
        Rel::Ne => "ne",
    }
}

fn rel_from_name(name: &str) -> Result<Rel, WireError> {
    Ok(match name {
        "le" => Rel::Le,
        "gt" => Rel::Gt,
        "ge" => Rel::Ge,
        "eq" => Rel::Eq,
        "ne" => Rel::Ne,
        other => return Err(WireError::BadRel(other.to_string())),
    })
}

pub fn formula_to_json(f: &Formula) -> FormulaJson {
    match f {
        Formula::True => FormulaJson::True,
        Formula::False => FormulaJson::False,
        Formula::Atom(a) => FormulaJson::Atom {
            terms: a
                .terms
                .iter()
                .map(|(c, t)| CoeffTermJson { coeff: *c, term: term_to_meta(t) })
                .collect(),
            rel: rel_name(a.rel).to_string(),
            bound: a.bound.to_string(),
        },
        Formula::And(children) => {
            FormulaJson::And { args: children.iter().map(formula_to_json).collect() }
        }
        Formula::Or(children) => {
            FormulaJson::Or { args: children.iter().map(formula_to_json).collect() }
        }
        Formula::Not(inner) => FormulaJson::Not { arg: Box::new(formula_to_json(inner)) },
    }
}

pub fn formula_from_json(j: &FormulaJson) -> Result<Formula, WireError> {
    Ok(match j {
        FormulaJson::True => Formula::True,
        FormulaJson::False => Formula::False,
        FormulaJson::Atom { terms, rel, bound } => {
            let b: HalfInt =
                bound.parse().map_err(|_| WireError::BadThreshold(bound.clone()))?;
            Formula::Atom(Atom {
                terms: terms
                    .iter()
                    .map(|ct| (ct.coeff, Term::from(&ct.term)))
                    .collect(),
                rel: rel_from_name(rel)?,
                bound: b,
            })
        }
        FormulaJson::And { args } => Formula::And(
            args.iter().map(formula_from_json).collect::<Result<_, _>>()?,
        ),
        FormulaJson::Or { args } => Formula::Or(
            args.iter().map(formula_from_json).collect::<Result<_, _>>()?,
        ),
        FormulaJson::Not { arg } => Formula::Not(Box::new(formula_from_json(arg)?)),
    })
}
