//! Candidate invariants as quantifier-free linear formulas.
//!
//! Atoms compare an integer combination of terms against a half-integer
//! bound. Terms are variables, `v mod k` columns, or variable products, the
//! same shapes the feature extractor produces, so a decision tree over
//! features converts directly: each inner node contributes `z <= t` on the
//! left and `z > t` on the right.
//!
//! `simplify` normalizes to disjunctive normal form over integerized atoms,
//! fuses per-direction bounds into intervals, drops implied disjuncts, and
//! merges single-direction disjuncts whose union is simpler, which is what
//! turns the two-split tree for the alternating walk into `x + y != 0`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::dtlearn::{DecisionTree, Node};
use crate::features::{FeatureMeta, SlopeMatrix};
use crate::program::{parse_predicate_with_vars, CmpOp, Expr, ParseError, Pred, State};
use crate::rational::HalfInt;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("formula is not linear: {0}")]
    Nonlinear(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("arithmetic overflow in formula")]
    Overflow,
}

/// One term of an atom's left-hand side.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Mod { var: String, modulus: i64 },
    Product { left: String, right: String },
}

impl Term {
    pub fn product(a: impl Into<String>, b: impl Into<String>) -> Term {
        let (a, b) = (a.into(), b.into());
        if a <= b {
            Term::Product { left: a, right: b }
        } else {
            Term::Product { left: b, right: a }
        }
    }

    fn canonical(self) -> Term {
        match self {
            Term::Product { left, right } => Term::product(left, right),
            other => other,
        }
    }
}

impl From<&FeatureMeta> for Term {
    fn from(m: &FeatureMeta) -> Term {
        match m {
            FeatureMeta::Var { var } => Term::Var(var.clone()),
            FeatureMeta::Mod { var, modulus } => {
                Term::Mod { var: var.clone(), modulus: *modulus }
            }
            FeatureMeta::Product { left, right } => Term::product(left.clone(), right.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rel {
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

/// A normalized atom: distinct sorted terms with nonzero coefficients,
/// compared against a half-integer bound.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub terms: Vec<(i64, Term)>,
    pub rel: Rel,
    pub bound: HalfInt,
}

impl Atom {
    fn negated(&self) -> Result<Atom, FormulaError> {
        let (rel, bound) = match self.rel {
            Rel::Le => (Rel::Gt, self.bound),
            Rel::Gt => (Rel::Le, self.bound),
            Rel::Eq => (Rel::Ne, self.bound),
            Rel::Ne => (Rel::Eq, self.bound),
            // not (lhs >= b) is lhs < b, which over the integers is
            // lhs <= ceil(b) - 1.
            Rel::Ge => {
                let b = HalfInt::checked_from_int(
                    self.bound.ceil().checked_sub(1).ok_or(FormulaError::Overflow)?,
                )
                .ok_or(FormulaError::Overflow)?;
                (Rel::Le, b)
            }
        };
        Ok(Atom { terms: self.terms.clone(), rel, bound })
    }

    /// Rewrites the atom with an integer bound, using that the left-hand
    /// side is always an integer. Returns `None` when the atom is constant
    /// true or false.
    fn integerized(&self) -> Result<Option<Atom>, FormulaError> {
        let floor = self.bound.floor();
        let make = |rel: Rel, b: i64| -> Result<Option<Atom>, FormulaError> {
            Ok(Some(Atom {
                terms: self.terms.clone(),
                rel,
                bound: HalfInt::checked_from_int(b).ok_or(FormulaError::Overflow)?,
            }))
        };
        match self.rel {
            Rel::Le => make(Rel::Le, floor),
            Rel::Gt => make(Rel::Ge, floor.checked_add(1).ok_or(FormulaError::Overflow)?),
            Rel::Ge => make(Rel::Ge, self.bound.ceil()),
            Rel::Eq if self.bound.is_integer() => make(Rel::Eq, floor),
            Rel::Ne if self.bound.is_integer() => make(Rel::Ne, floor),
            Rel::Eq => Ok(None),
            Rel::Ne => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
}

impl Formula {
    /// Builds an atom, combining duplicate terms and folding the constant
    /// case.
    pub fn atom(
        terms: Vec<(i64, Term)>,
        rel: Rel,
        bound: HalfInt,
    ) -> Result<Formula, FormulaError> {
        let mut combined: BTreeMap<Term, i64> = BTreeMap::new();
        for (c, t) in terms {
            let entry = combined.entry(t.canonical()).or_insert(0);
            *entry = entry.checked_add(c).ok_or(FormulaError::Overflow)?;
        }
        combined.retain(|_, c| *c != 0);
        if combined.is_empty() {
            let holds = match rel {
                Rel::Le => bound.twice() >= 0,
                Rel::Gt => bound.twice() < 0,
                Rel::Ge => bound.twice() <= 0,
                Rel::Eq => bound.twice() == 0,
                Rel::Ne => bound.twice() != 0,
            };
            return Ok(if holds { Formula::True } else { Formula::False });
        }
        let terms = combined.into_iter().map(|(t, c)| (c, t)).collect();
        Ok(Formula::Atom(Atom { terms, rel, bound }))
    }

    /// Conjunction with trivial absorption.
    pub fn and(parts: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(children) => out.extend(children),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    /// Disjunction with trivial absorption.
    pub fn or(parts: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(children) => out.extend(children),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    pub fn not(f: Formula) -> Formula {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(inner) => *inner,
            other => Formula::Not(Box::new(other)),
        }
    }
}

/// Converts a learned tree into a formula: good leaves are `true`, bad
/// leaves are `false`, and each inner node cases on its split feature.
pub fn dt_to_form(tree: &DecisionTree, slopes: &SlopeMatrix) -> Result<Formula, FormulaError> {
    fn feature_terms(slopes: &SlopeMatrix, feature: usize) -> Vec<(i64, Term)> {
        slopes.rows()[feature]
            .iter()
            .zip(slopes.meta())
            .filter(|(c, _)| **c != 0)
            .map(|(c, m)| (*c, Term::from(m)))
            .collect()
    }
    fn walk(node: &Node, slopes: &SlopeMatrix) -> Result<Formula, FormulaError> {
        match node {
            Node::Leaf(crate::sampler::Label::Good) => Ok(Formula::True),
            Node::Leaf(crate::sampler::Label::Bad) => Ok(Formula::False),
            Node::Inner { split, left, right } => {
                let terms = feature_terms(slopes, split.feature);
                let cond = Formula::atom(terms.clone(), Rel::Le, split.threshold)?;
                let not_cond = Formula::atom(terms, Rel::Gt, split.threshold)?;
                let l = walk(left, slopes)?;
                let r = walk(right, slopes)?;
                Ok(Formula::or(vec![
                    Formula::and(vec![cond, l]),
                    Formula::and(vec![not_cond, r]),
                ]))
            }
        }
    }
    walk(&tree.root, slopes)
}

fn nnf(f: &Formula, negate: bool) -> Result<Formula, FormulaError> {
    Ok(match f {
        Formula::True => {
            if negate {
                Formula::False
            } else {
                Formula::True
            }
        }
        Formula::False => {
            if negate {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::Atom(a) => {
            if negate {
                Formula::Atom(a.negated()?)
            } else {
                Formula::Atom(a.clone())
            }
        }
        Formula::And(children) => {
            let parts = children.iter().map(|c| nnf(c, negate)).collect::<Result<_, _>>()?;
            if negate {
                Formula::or(parts)
            } else {
                Formula::and(parts)
            }
        }
        Formula::Or(children) => {
            let parts = children.iter().map(|c| nnf(c, negate)).collect::<Result<_, _>>()?;
            if negate {
                Formula::and(parts)
            } else {
                Formula::or(parts)
            }
        }
        Formula::Not(inner) => nnf(inner, !negate)?,
    })
}

fn integerize(f: &Formula) -> Result<Formula, FormulaError> {
    Ok(match f {
        Formula::Atom(a) => match a.integerized()? {
            Some(atom) => Formula::Atom(atom),
            None => match a.rel {
                Rel::Eq => Formula::False,
                _ => Formula::True,
            },
        },
        Formula::And(children) => {
            Formula::and(children.iter().map(integerize).collect::<Result<_, _>>()?)
        }
        Formula::Or(children) => {
            Formula::or(children.iter().map(integerize).collect::<Result<_, _>>()?)
        }
        other => other.clone(),
    })
}

fn dnf(f: &Formula) -> Vec<Vec<Atom>> {
    match f {
        Formula::True => vec![vec![]],
        Formula::False => vec![],
        Formula::Atom(a) => vec![vec![a.clone()]],
        Formula::Or(children) => children.iter().flat_map(dnf).collect(),
        Formula::And(children) => {
            let mut acc: Vec<Vec<Atom>> = vec![vec![]];
            for child in children {
                let child_dnf = dnf(child);
                let mut next = Vec::with_capacity(acc.len() * child_dnf.len());
                for base in &acc {
                    for extra in &child_dnf {
                        let mut d = base.clone();
                        d.extend(extra.iter().cloned());
                        next.push(d);
                    }
                }
                acc = next;
            }
            acc
        }
        Formula::Not(_) => unreachable!("negation normal form has no Not nodes"),
    }
}

type Key = Vec<(i64, Term)>;

/// Flips the sign of a left-hand side if its first coefficient is negative,
/// so `x - y` and `y - x` share a key. Returns the canonical terms and
/// whether they were flipped.
fn canonical_key(terms: &[(i64, Term)]) -> (Key, bool) {
    let flip = terms.first().map(|(c, _)| *c < 0).unwrap_or(false);
    if flip {
        (terms.iter().map(|(c, t)| (-c, t.clone())).collect(), true)
    } else {
        (terms.to_vec(), false)
    }
}

/// Bounds on one left-hand side inside a conjunction.
#[derive(Debug, Clone, PartialEq, Eq)]
struct KeyConstraint {
    lo: Option<i64>,
    hi: Option<i64>,
    nes: BTreeSet<i64>,
}

impl KeyConstraint {
    fn unconstrained() -> Self {
        Self { lo: None, hi: None, nes: BTreeSet::new() }
    }

    fn add(&mut self, rel: Rel, bound: i64) -> bool {
        match rel {
            Rel::Le => self.hi = Some(self.hi.map_or(bound, |h| h.min(bound))),
            Rel::Ge => self.lo = Some(self.lo.map_or(bound, |l| l.max(bound))),
            Rel::Eq => {
                self.lo = Some(self.lo.map_or(bound, |l| l.max(bound)));
                self.hi = Some(self.hi.map_or(bound, |h| h.min(bound)));
            }
            Rel::Ne => {
                self.nes.insert(bound);
            }
            Rel::Gt => unreachable!("integerized atoms have no strict greater-than"),
        }
        !matches!((self.lo, self.hi), (Some(l), Some(h)) if l > h)
    }

    /// Tightens bounds against exclusions. `None` means unsatisfiable.
    fn normalized(mut self) -> Option<Self> {
        loop {
            if let (Some(l), Some(h)) = (self.lo, self.hi) {
                if l > h {
                    return None;
                }
            }
            if let Some(l) = self.lo {
                if self.nes.contains(&l) {
                    self.lo = Some(l.checked_add(1)?);
                    continue;
                }
            }
            if let Some(h) = self.hi {
                if self.nes.contains(&h) {
                    self.hi = Some(h.checked_sub(1)?);
                    continue;
                }
            }
            break;
        }
        let (lo, hi) = (self.lo, self.hi);
        self.nes.retain(|v| lo.map_or(true, |l| *v > l) && hi.map_or(true, |h| *v < h));
        Some(self)
    }

    /// Whether every integer satisfying `self` also satisfies `other`.
    fn subsumed_by(&self, other: &KeyConstraint) -> bool {
        let lo_ok = match (other.lo, self.lo) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(ol), Some(sl)) => ol <= sl,
        };
        let hi_ok = match (other.hi, self.hi) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(oh), Some(sh)) => sh <= oh,
        };
        lo_ok
            && hi_ok
            && other.nes.iter().all(|v| {
                self.nes.contains(v)
                    || self.lo.map_or(false, |l| *v < l)
                    || self.hi.map_or(false, |h| *v > h)
            })
    }

    /// Maximal intervals of satisfying integers, in ascending order.
    fn segments(&self) -> Vec<(Option<i64>, Option<i64>)> {
        let mut out = Vec::with_capacity(self.nes.len() + 1);
        let mut cur = self.lo;
        for &v in &self.nes {
            out.push((cur, Some(v - 1)));
            cur = Some(v + 1);
        }
        out.push((cur, self.hi));
        out
    }

    fn atoms(&self, key: &Key) -> Vec<Atom> {
        let b = |v: i64| HalfInt::from_int(v);
        match (self.lo, self.hi) {
            (Some(l), Some(h)) if l == h => {
                return vec![Atom { terms: key.clone(), rel: Rel::Eq, bound: b(l) }]
            }
            _ => {}
        }
        let mut out = Vec::new();
        if let Some(l) = self.lo {
            out.push(Atom { terms: key.clone(), rel: Rel::Ge, bound: b(l) });
        }
        if let Some(h) = self.hi {
            out.push(Atom { terms: key.clone(), rel: Rel::Le, bound: b(h) });
        }
        for &v in &self.nes {
            out.push(Atom { terms: key.clone(), rel: Rel::Ne, bound: b(v) });
        }
        out
    }
}

type Disjunct = BTreeMap<Key, KeyConstraint>;

fn fuse_disjunct(atoms: &[Atom]) -> Option<Disjunct> {
    let mut map: Disjunct = BTreeMap::new();
    for a in atoms {
        let (key, flipped) = canonical_key(&a.terms);
        let bound = a.bound.floor();
        let (rel, bound) = if flipped {
            let nb = bound.checked_neg()?;
            match a.rel {
                Rel::Le => (Rel::Ge, nb),
                Rel::Ge => (Rel::Le, nb),
                Rel::Eq => (Rel::Eq, nb),
                Rel::Ne => (Rel::Ne, nb),
                Rel::Gt => unreachable!("integerized atoms have no strict greater-than"),
            }
        } else {
            (a.rel, bound)
        };
        if !map.entry(key).or_insert_with(KeyConstraint::unconstrained).add(rel, bound) {
            return None;
        }
    }
    let mut out = BTreeMap::new();
    for (k, c) in map {
        out.insert(k, c.normalized()?);
    }
    Some(out)
}

fn disjunct_implies(stronger: &Disjunct, weaker: &Disjunct) -> bool {
    weaker.iter().all(|(k, wc)| match stronger.get(k) {
        Some(sc) => sc.subsumed_by(wc),
        None => false,
    })
}

fn merge_segments(
    mut segs: Vec<(Option<i64>, Option<i64>)>,
) -> Vec<(Option<i64>, Option<i64>)> {
    segs.sort_by_key(|s| (s.0.is_some(), s.0));
    let mut out: Vec<(Option<i64>, Option<i64>)> = Vec::new();
    for seg in segs {
        match out.last_mut() {
            None => out.push(seg),
            Some(last) => {
                let touches = match (last.1, seg.0) {
                    (None, _) => true,
                    (_, None) => true,
                    (Some(h), Some(l)) => l <= h.saturating_add(1),
                };
                if touches {
                    last.1 = match (last.1, seg.1) {
                        (None, _) | (_, None) => None,
                        (Some(a), Some(b)) => Some(a.max(b)),
                    };
                } else {
                    out.push(seg);
                }
            }
        }
    }
    out
}

fn segment_constraint(seg: (Option<i64>, Option<i64>)) -> KeyConstraint {
    KeyConstraint { lo: seg.0, hi: seg.1, nes: BTreeSet::new() }
}

fn drop_implied(disjuncts: &mut Vec<Disjunct>) {
    let mut keep = vec![true; disjuncts.len()];
    for i in 0..disjuncts.len() {
        if !keep[i] {
            continue;
        }
        for j in 0..disjuncts.len() {
            if i == j || !keep[j] {
                continue;
            }
            if disjunct_implies(&disjuncts[i], &disjuncts[j])
                && (!disjunct_implies(&disjuncts[j], &disjuncts[i]) || j < i)
            {
                keep[i] = false;
                break;
            }
        }
    }
    let mut it = keep.iter();
    disjuncts.retain(|_| *it.next().unwrap());
}

/// Normalizes a formula: negation normal form, integer bounds, disjunctive
/// normal form, interval fusion per direction, removal of implied
/// disjuncts, and union merging of single-direction disjuncts.
pub fn simplify(f: &Formula) -> Result<Formula, FormulaError> {
    let normal = integerize(&nnf(f, false)?)?;
    let raw = dnf(&normal);
    if raw.is_empty() {
        return Ok(Formula::False);
    }
    let mut disjuncts: Vec<Disjunct> = Vec::new();
    for d in &raw {
        if let Some(fused) = fuse_disjunct(d) {
            if fused.is_empty() {
                return Ok(Formula::True);
            }
            disjuncts.push(fused);
        }
    }
    if disjuncts.is_empty() {
        return Ok(Formula::False);
    }
    drop_implied(&mut disjuncts);

    // Merge disjuncts that constrain a single direction into a union of
    // intervals over that direction.
    let mut singles: BTreeMap<Key, Vec<(Option<i64>, Option<i64>)>> = BTreeMap::new();
    let mut rest: Vec<Disjunct> = Vec::new();
    for d in disjuncts {
        if d.len() == 1 {
            let (k, c) = d.into_iter().next().unwrap();
            singles.entry(k).or_default().extend(c.segments());
        } else {
            rest.push(d);
        }
    }
    let mut merged: Vec<Disjunct> = Vec::new();
    for (key, segs) in singles {
        let union = merge_segments(segs);
        if union == [(None, None)] {
            return Ok(Formula::True);
        }
        let single_hole = match union.as_slice() {
            [(None, Some(a)), (Some(b), None)] if *b == a.saturating_add(2) => Some(a + 1),
            _ => None,
        };
        if let Some(hole) = single_hole {
            let mut c = KeyConstraint::unconstrained();
            c.add(Rel::Ne, hole);
            merged.push(BTreeMap::from([(key, c)]));
        } else {
            for seg in union {
                merged.push(BTreeMap::from([(key.clone(), segment_constraint(seg))]));
            }
        }
    }
    let mut disjuncts = rest;
    disjuncts.extend(merged);
    drop_implied(&mut disjuncts);

    let mut parts: Vec<Formula> = disjuncts
        .iter()
        .map(|d| {
            let atoms: Vec<Formula> = d
                .iter()
                .flat_map(|(k, c)| c.atoms(k))
                .map(Formula::Atom)
                .collect();
            Formula::and(atoms)
        })
        .collect();
    parts.sort();
    parts.dedup();
    Ok(Formula::or(parts))
}

fn term_gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Counts distinct predicates: atoms are identified up to scaling and
/// direction, with inequalities and (dis)equalities over the same
/// hyperplane counted separately.
pub fn count_predicates(f: &Formula) -> usize {
    fn collect(f: &Formula, out: &mut BTreeSet<(Vec<(i64, Term)>, (i64, i64), bool)>) {
        match f {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => {
                let g = a.terms.iter().fold(0i64, |acc, (c, _)| term_gcd(acc, *c));
                let sign = if a.terms.first().map(|(c, _)| *c < 0).unwrap_or(false) {
                    -1
                } else {
                    1
                };
                let div = g.max(1) * sign;
                let terms: Vec<(i64, Term)> =
                    a.terms.iter().map(|(c, t)| (c / div, t.clone())).collect();
                // Bound as a reduced rational: twice / (2 * div).
                let mut num = a.bound.twice();
                let mut den = 2 * div;
                if den < 0 {
                    num = -num;
                    den = -den;
                }
                let r = term_gcd(num, den).max(1);
                let eq_class = matches!(a.rel, Rel::Eq | Rel::Ne);
                out.insert((terms, (num / r, den / r), eq_class));
            }
            Formula::And(children) | Formula::Or(children) => {
                children.iter().for_each(|c| collect(c, out));
            }
            Formula::Not(inner) => collect(inner, out),
        }
    }
    let mut set = BTreeSet::new();
    collect(f, &mut set);
    set.len()
}

/// A formula with variable names resolved to state indices, ready for fast
/// repeated evaluation.
#[derive(Debug, Clone)]
pub enum ResolvedFormula {
    True,
    False,
    Atom { terms: Vec<(i64, ResolvedTerm)>, rel: Rel, bound: HalfInt },
    And(Vec<ResolvedFormula>),
    Or(Vec<ResolvedFormula>),
    Not(Box<ResolvedFormula>),
}

#[derive(Debug, Clone, Copy)]
pub enum ResolvedTerm {
    Var(usize),
    Mod { var: usize, modulus: i64 },
    Product { left: usize, right: usize },
}

/// Resolves term names against a variable table.
pub fn resolve(f: &Formula, vars: &[String]) -> Result<ResolvedFormula, FormulaError> {
    let index = |name: &str| {
        vars.iter()
            .position(|v| v == name)
            .ok_or_else(|| FormulaError::UnknownVariable(name.to_string()))
    };
    Ok(match f {
        Formula::True => ResolvedFormula::True,
        Formula::False => ResolvedFormula::False,
        Formula::Atom(a) => {
            let terms = a
                .terms
                .iter()
                .map(|(c, t)| {
                    Ok((
                        *c,
                        match t {
                            Term::Var(v) => ResolvedTerm::Var(index(v)?),
                            Term::Mod { var, modulus } => {
                                ResolvedTerm::Mod { var: index(var)?, modulus: *modulus }
                            }
                            Term::Product { left, right } => ResolvedTerm::Product {
                                left: index(left)?,
                                right: index(right)?,
                            },
                        },
                    ))
                })
                .collect::<Result<_, FormulaError>>()?;
            ResolvedFormula::Atom { terms, rel: a.rel, bound: a.bound }
        }
        Formula::And(children) => ResolvedFormula::And(
            children.iter().map(|c| resolve(c, vars)).collect::<Result<_, _>>()?,
        ),
        Formula::Or(children) => ResolvedFormula::Or(
            children.iter().map(|c| resolve(c, vars)).collect::<Result<_, _>>()?,
        ),
        Formula::Not(inner) => ResolvedFormula::Not(Box::new(resolve(inner, vars)?)),
    })
}

impl ResolvedFormula {
    /// Evaluates over a state. Arithmetic runs in 128 bits, which cannot
    /// overflow for 64-bit states and coefficients.
    pub fn eval(&self, s: &State) -> bool {
        match self {
            ResolvedFormula::True => true,
            ResolvedFormula::False => false,
            ResolvedFormula::Atom { terms, rel, bound } => {
                let mut acc: i128 = 0;
                for (c, t) in terms {
                    let v: i128 = match t {
                        ResolvedTerm::Var(i) => s.0[*i] as i128,
                        ResolvedTerm::Mod { var, modulus } => {
                            s.0[*var].rem_euclid(*modulus) as i128
                        }
                        ResolvedTerm::Product { left, right } => {
                            s.0[*left] as i128 * s.0[*right] as i128
                        }
                    };
                    acc += *c as i128 * v;
                }
                let lhs = 2 * acc;
                let rhs = bound.twice() as i128;
                match rel {
                    Rel::Le => lhs <= rhs,
                    Rel::Gt => lhs > rhs,
                    Rel::Ge => lhs >= rhs,
                    Rel::Eq => lhs == rhs,
                    Rel::Ne => lhs != rhs,
                }
            }
            ResolvedFormula::And(children) => children.iter().all(|c| c.eval(s)),
            ResolvedFormula::Or(children) => children.iter().any(|c| c.eval(s)),
            ResolvedFormula::Not(inner) => !inner.eval(s),
        }
    }
}

/// Linear view of a parsed expression: integer coefficients per term plus a
/// constant.
struct LinExpr {
    terms: BTreeMap<Term, i64>,
    constant: i64,
}

impl LinExpr {
    fn constant(c: i64) -> Self {
        Self { terms: BTreeMap::new(), constant: c }
    }

    fn single(t: Term) -> Self {
        Self { terms: BTreeMap::from([(t, 1)]), constant: 0 }
    }

    fn add(mut self, other: LinExpr, sign: i64) -> Result<Self, FormulaError> {
        for (t, c) in other.terms {
            let entry = self.terms.entry(t).or_insert(0);
            *entry = entry
                .checked_add(c.checked_mul(sign).ok_or(FormulaError::Overflow)?)
                .ok_or(FormulaError::Overflow)?;
        }
        self.constant = self
            .constant
            .checked_add(other.constant.checked_mul(sign).ok_or(FormulaError::Overflow)?)
            .ok_or(FormulaError::Overflow)?;
        Ok(self)
    }

    fn scale(mut self, k: i64) -> Result<Self, FormulaError> {
        for c in self.terms.values_mut() {
            *c = c.checked_mul(k).ok_or(FormulaError::Overflow)?;
        }
        self.constant = self.constant.checked_mul(k).ok_or(FormulaError::Overflow)?;
        Ok(self)
    }

    fn as_constant(&self) -> Option<i64> {
        self.terms.is_empty().then_some(self.constant)
    }

    /// The single bare variable, when the expression is exactly `1 * v`.
    fn as_var(&self) -> Option<&str> {
        if self.constant != 0 || self.terms.len() != 1 {
            return None;
        }
        match self.terms.iter().next() {
            Some((Term::Var(v), 1)) => Some(v),
            _ => None,
        }
    }

    /// The single term with its coefficient, when the expression is
    /// `c * term` with no constant part.
    fn as_single_var_term(&self) -> Option<(i64, &str)> {
        if self.constant != 0 || self.terms.len() != 1 {
            return None;
        }
        match self.terms.iter().next() {
            Some((Term::Var(v), c)) => Some((*c, v)),
            _ => None,
        }
    }
}

fn linearize(e: &Expr, vars: &[String]) -> Result<LinExpr, FormulaError> {
    match e {
        Expr::Lit(v) => Ok(LinExpr::constant(*v)),
        Expr::Var(i) => Ok(LinExpr::single(Term::Var(vars[*i].clone()))),
        Expr::Add(a, b) => linearize(a, vars)?.add(linearize(b, vars)?, 1),
        Expr::Sub(a, b) => linearize(a, vars)?.add(linearize(b, vars)?, -1),
        Expr::Neg(a) => linearize(a, vars)?.scale(-1),
        Expr::Mul(a, b) => {
            let la = linearize(a, vars)?;
            let lb = linearize(b, vars)?;
            if let Some(c) = la.as_constant() {
                lb.scale(c)
            } else if let Some(c) = lb.as_constant() {
                la.scale(c)
            } else if let (Some((ca, va)), Some((cb, vb))) =
                (la.as_single_var_term(), lb.as_single_var_term())
            {
                let coeff = ca.checked_mul(cb).ok_or(FormulaError::Overflow)?;
                Ok(LinExpr {
                    terms: BTreeMap::from([(Term::product(va, vb), coeff)]),
                    constant: 0,
                })
            } else {
                Err(FormulaError::Nonlinear(
                    "products must multiply a constant or two single variables".into(),
                ))
            }
        }
        Expr::Mod(a, k) => {
            let la = linearize(a, vars)?;
            match la.as_var() {
                Some(v) => Ok(LinExpr::single(Term::Mod { var: v.to_string(), modulus: *k })),
                None => Err(FormulaError::Nonlinear(
                    "mod is only supported on a bare variable".into(),
                )),
            }
        }
    }
}

fn pred_to_formula(p: &Pred, vars: &[String]) -> Result<Formula, FormulaError> {
    Ok(match p {
        Pred::Bool(true) => Formula::True,
        Pred::Bool(false) => Formula::False,
        Pred::Cmp(op, a, b) => {
            let diff = linearize(a, vars)?.add(linearize(b, vars)?, -1)?;
            let bound_int = diff.constant.checked_neg().ok_or(FormulaError::Overflow)?;
            let terms: Vec<(i64, Term)> =
                diff.terms.into_iter().map(|(t, c)| (c, t)).collect();
            let bound = HalfInt::checked_from_int(bound_int).ok_or(FormulaError::Overflow)?;
            let (rel, bound) = match op {
                CmpOp::Le => (Rel::Le, bound),
                CmpOp::Lt => (
                    Rel::Le,
                    HalfInt::checked_from_int(bound_int.checked_sub(1).ok_or(FormulaError::Overflow)?)
                        .ok_or(FormulaError::Overflow)?,
                ),
                CmpOp::Ge => (Rel::Ge, bound),
                CmpOp::Gt => (Rel::Gt, bound),
                CmpOp::Eq => (Rel::Eq, bound),
                CmpOp::Ne => (Rel::Ne, bound),
            };
            Formula::atom(terms, rel, bound)?
        }
        Pred::And(a, b) => {
            Formula::and(vec![pred_to_formula(a, vars)?, pred_to_formula(b, vars)?])
        }
        Pred::Or(a, b) => {
            Formula::or(vec![pred_to_formula(a, vars)?, pred_to_formula(b, vars)?])
        }
        Pred::Not(a) => Formula::not(pred_to_formula(a, vars)?),
    })
}

/// Parses a formula from predicate syntax against a variable table.
pub fn parse_formula(text: &str, vars: &[String]) -> Result<Formula, FormulaError> {
    let pred = parse_predicate_with_vars(text, vars)?;
    pred_to_formula(&pred, vars)
}

fn fmt_term(coeff: i64, term: &Term, first: bool, out: &mut String) {
    let mag = coeff.abs();
    if first {
        if coeff < 0 {
            out.push('-');
        }
    } else if coeff < 0 {
        out.push_str(" - ");
    } else {
        out.push_str(" + ");
    }
    if mag != 1 {
        out.push_str(&format!("{mag}*"));
    }
    match term {
        Term::Var(v) => out.push_str(v),
        Term::Mod { var, modulus } => {
            let bare = first && coeff == 1;
            if bare {
                out.push_str(&format!("{var} mod {modulus}"));
            } else {
                out.push_str(&format!("({var} mod {modulus})"));
            }
        }
        Term::Product { left, right } => out.push_str(&format!("{left}*{right}")),
    }
}

impl std::fmt::Display for Atom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut out = String::new();
        for (i, (c, t)) in self.terms.iter().enumerate() {
            fmt_term(*c, t, i == 0, &mut out);
        }
        let rel = match self.rel {
            Rel::Le => "<=",
            Rel::Gt => ">",
            Rel::Ge => ">=",
            Rel::Eq => "=",
            Rel::Ne => "!=",
        };
        write!(f, "{out} {rel} {}", self.bound)
    }
}

impl std::fmt::Display for Formula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fn go(form: &Formula, parent_and: bool, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            match form {
                Formula::True => f.write_str("true"),
                Formula::False => f.write_str("false"),
                Formula::Atom(a) => write!(f, "{a}"),
                Formula::And(children) => {
                    for (i, c) in children.iter().enumerate() {
                        if i > 0 {
                            f.write_str(" && ")?;
                        }
                        go(c, true, f)?;
                    }
                    Ok(())
                }
                Formula::Or(children) => {
                    if parent_and {
                        f.write_str("(")?;
                    }
                    for (i, c) in children.iter().enumerate() {
                        if i > 0 {
                            f.write_str(" || ")?;
                        }
                        go(c, false, f)?;
                    }
                    if parent_and {
                        f.write_str(")")?;
                    }
                    Ok(())
                }
                Formula::Not(inner) => {
                    f.write_str("!(")?;
                    go(inner, false, f)?;
                    f.write_str(")")
                }
            }
        }
        go(self, false, f)
    }
}
