//! Feature construction: slope matrices over an extended state vector.
//!
//! Raw states are extended with optional derived columns, `v mod k` and
//! variable products, and a slope matrix H maps extended states to feature
//! values z = H·x. Decision trees split on those feature values, so each row
//! of H is one candidate left-hand side for a linear inequality.
//!
//! Three slope domains are provided: the octagon domain (unit vectors plus
//! pairwise sums and differences), a constant-based domain derived from the
//! literals of the program, and data-driven directions from principal
//! component analysis, rationalized to small integer vectors.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::State;
use crate::sampler::{Label, SampleSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate feature column `{0}`")]
    DuplicateColumn(String),
    #[error("mod feature needs a modulus of at least 2, got {0}")]
    BadModulus(i64),
    #[error("slope matrix must have at least one row")]
    Empty,
    #[error("slope row {row} has {got} entries, expected {want}")]
    ShapeMismatch { row: usize, got: usize, want: usize },
    #[error("slope row {0} is all zeros")]
    ZeroRow(usize),
    #[error("slope rows {0} and {1} are identical")]
    DuplicateRow(usize, usize),
    #[error("arithmetic overflow while computing features")]
    Overflow,
}

/// One column of the extended state vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureMeta {
    Var { var: String },
    Mod { var: String, modulus: i64 },
    Product { left: String, right: String },
}

impl std::fmt::Display for FeatureMeta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureMeta::Var { var } => write!(f, "{var}"),
            FeatureMeta::Mod { var, modulus } => write!(f, "{var} mod {modulus}"),
            FeatureMeta::Product { left, right } => write!(f, "{left}*{right}"),
        }
    }
}

/// An extra column requested on the command line or detected from the
/// program text.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AugmentTerm {
    Square(String),
    Product(String, String),
    Mod(String, i64),
}

impl std::str::FromStr for AugmentTerm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["square", v] if !v.is_empty() => Ok(AugmentTerm::Square(v.to_string())),
            ["prod", a, b] if !a.is_empty() && !b.is_empty() => {
                Ok(AugmentTerm::Product(a.to_string(), b.to_string()))
            }
            ["mod", v, k] if !v.is_empty() => {
                let k: i64 = k
                    .parse()
                    .map_err(|_| format!("bad modulus in augment term `{s}`"))?;
                Ok(AugmentTerm::Mod(v.to_string(), k))
            }
            _ => Err(format!(
                "bad augment term `{s}`; expected square:VAR, prod:VAR:VAR, or mod:VAR:K"
            )),
        }
    }
}

/// Builds the extended column list: one `Var` column per program variable,
/// followed by the requested augmentation columns.
pub fn extended_meta(
    vars: &[String],
    terms: &[AugmentTerm],
) -> Result<Vec<FeatureMeta>, FeatureError> {
    let check = |name: &str| -> Result<(), FeatureError> {
        if vars.iter().any(|v| v == name) {
            Ok(())
        } else {
            Err(FeatureError::UnknownVariable(name.to_string()))
        }
    };
    let mut meta: Vec<FeatureMeta> =
        vars.iter().map(|v| FeatureMeta::Var { var: v.clone() }).collect();
    for term in terms {
        let m = match term {
            AugmentTerm::Square(v) => {
                check(v)?;
                FeatureMeta::Product { left: v.clone(), right: v.clone() }
            }
            AugmentTerm::Product(a, b) => {
                check(a)?;
                check(b)?;
                let (l, r) = if a <= b { (a, b) } else { (b, a) };
                FeatureMeta::Product { left: l.clone(), right: r.clone() }
            }
            AugmentTerm::Mod(v, k) => {
                check(v)?;
                if *k < 2 {
                    return Err(FeatureError::BadModulus(*k));
                }
                FeatureMeta::Mod { var: v.clone(), modulus: *k }
            }
        };
        if meta.contains(&m) {
            return Err(FeatureError::DuplicateColumn(m.to_string()));
        }
        meta.push(m);
    }
    Ok(meta)
}

enum ResolvedCol {
    Var(usize),
    Mod(usize, i64),
    Product(usize, usize),
}

fn resolve_meta(meta: &[FeatureMeta], vars: &[String]) -> Result<Vec<ResolvedCol>, FeatureError> {
    let index = |name: &str| {
        vars.iter()
            .position(|v| v == name)
            .ok_or_else(|| FeatureError::UnknownVariable(name.to_string()))
    };
    meta.iter()
        .map(|m| {
            Ok(match m {
                FeatureMeta::Var { var } => ResolvedCol::Var(index(var)?),
                FeatureMeta::Mod { var, modulus } => ResolvedCol::Mod(index(var)?, *modulus),
                FeatureMeta::Product { left, right } => {
                    ResolvedCol::Product(index(left)?, index(right)?)
                }
            })
        })
        .collect()
}

fn extended_row(state: &State, cols: &[ResolvedCol]) -> Result<Vec<i64>, FeatureError> {
    cols.iter()
        .map(|c| match c {
            ResolvedCol::Var(i) => Ok(state.0[*i]),
            ResolvedCol::Mod(i, k) => Ok(state.0[*i].rem_euclid(*k)),
            ResolvedCol::Product(i, j) => {
                state.0[*i].checked_mul(state.0[*j]).ok_or(FeatureError::Overflow)
            }
        })
        .collect()
}

/// A validated slope matrix together with the meaning of its columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSlopes", into = "RawSlopes")]
pub struct SlopeMatrix {
    h: Vec<Vec<i64>>,
    meta: Vec<FeatureMeta>,
}

#[derive(Serialize, Deserialize, Clone)]
struct RawSlopes {
    h: Vec<Vec<i64>>,
    #[serde(rename = "featureMeta")]
    meta: Vec<FeatureMeta>,
}

impl TryFrom<RawSlopes> for SlopeMatrix {
    type Error = FeatureError;

    fn try_from(raw: RawSlopes) -> Result<Self, Self::Error> {
        SlopeMatrix::new(raw.h, raw.meta)
    }
}

impl From<SlopeMatrix> for RawSlopes {
    fn from(s: SlopeMatrix) -> Self {
        RawSlopes { h: s.h, meta: s.meta }
    }
}

impl SlopeMatrix {
    pub fn new(h: Vec<Vec<i64>>, meta: Vec<FeatureMeta>) -> Result<Self, FeatureError> {
        if h.is_empty() {
            return Err(FeatureError::Empty);
        }
        for (i, m) in meta.iter().enumerate() {
            if meta[..i].contains(m) {
                return Err(FeatureError::DuplicateColumn(m.to_string()));
            }
        }
        for (i, row) in h.iter().enumerate() {
            if row.len() != meta.len() {
                return Err(FeatureError::ShapeMismatch {
                    row: i,
                    got: row.len(),
                    want: meta.len(),
                });
            }
            if row.iter().all(|&c| c == 0) {
                return Err(FeatureError::ZeroRow(i));
            }
            if let Some(j) = h[..i].iter().position(|prev| prev == row) {
                return Err(FeatureError::DuplicateRow(j, i));
            }
        }
        Ok(Self { h, meta })
    }

    pub fn rows(&self) -> &[Vec<i64>] {
        &self.h
    }

    pub fn meta(&self) -> &[FeatureMeta] {
        &self.meta
    }

    pub fn num_features(&self) -> usize {
        self.h.len()
    }

    /// Human-readable rendering of one feature row, for reports.
    pub fn describe_feature(&self, row: usize) -> String {
        let mut out = String::new();
        for (c, m) in self.h[row].iter().zip(&self.meta) {
            if *c == 0 {
                continue;
            }
            let mut wrap = false;
            if out.is_empty() {
                if *c == -1 {
                    out.push('-');
                    wrap = true;
                } else if *c != 1 {
                    out.push_str(&format!("{c}*"));
                    wrap = true;
                }
            } else if *c > 0 {
                out.push_str(" + ");
                if *c != 1 {
                    out.push_str(&format!("{c}*"));
                    wrap = true;
                }
            } else {
                out.push_str(" - ");
                if *c != -1 {
                    out.push_str(&format!("{}*", -c));
                }
                wrap = true;
            }
            if wrap && matches!(m, FeatureMeta::Mod { .. }) {
                out.push_str(&format!("({m})"));
            } else {
                out.push_str(&m.to_string());
            }
        }
        out
    }
}

/// Transformed data: one column of feature values per slope row, aligned
/// with a label vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformedSample {
    pub z_cols: Vec<Vec<i64>>,
    pub labels: Vec<Label>,
}

impl TransformedSample {
    pub fn num_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.z_cols.len()
    }
}

/// Applies the slope matrix to every sampled state, good states first.
pub fn transform(
    sample: &SampleSet,
    slopes: &SlopeMatrix,
) -> Result<TransformedSample, FeatureError> {
    let cols = resolve_meta(&slopes.meta, &sample.vars)?;
    let n = sample.len();
    let mut z_cols = vec![Vec::with_capacity(n); slopes.h.len()];
    let mut labels = Vec::with_capacity(n);
    for (state, label) in sample.labeled() {
        let ext = extended_row(state, &cols)?;
        for (j, row) in slopes.h.iter().enumerate() {
            let mut acc: i128 = 0;
            for (c, x) in row.iter().zip(&ext) {
                acc += (*c as i128) * (*x as i128);
            }
            let v = i64::try_from(acc).map_err(|_| FeatureError::Overflow)?;
            z_cols[j].push(v);
        }
        labels.push(label);
    }
    Ok(TransformedSample { z_cols, labels })
}

/// Octagon slopes over `dim` columns: unit vectors, then for every pair
/// `i < j` the difference `e_i - e_j` followed by the sum `e_i + e_j`.
/// Produces exactly `dim * dim` rows.
pub fn octagon_slopes(dim: usize) -> Vec<Vec<i64>> {
    let mut rows = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        let mut r = vec![0; dim];
        r[i] = 1;
        rows.push(r);
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            let mut diff = vec![0; dim];
            diff[i] = 1;
            diff[j] = -1;
            rows.push(diff);
            let mut sum = vec![0; dim];
            sum[i] = 1;
            sum[j] = 1;
            rows.push(sum);
        }
    }
    rows
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Canonicalizes a slope row: divide by the gcd of its entries and flip the
/// sign so the first nonzero entry is positive. Returns `None` for the zero
/// row.
fn canonical_row(mut row: Vec<i64>) -> Option<Vec<i64>> {
    let g = row.iter().fold(0, |acc, &c| gcd(acc, c));
    if g == 0 {
        return None;
    }
    for c in &mut row {
        *c /= g;
    }
    if row.iter().find(|&&c| c != 0).is_some_and(|&c| c < 0) {
        for c in &mut row {
            *c = -*c;
        }
    }
    Some(row)
}

/// Slopes built from program literals: rows with at most two nonzero
/// entries drawn from the literals and ±1, deduplicated up to scaling.
pub fn constant_slopes(dim: usize, literals: &[i64]) -> Vec<Vec<i64>> {
    let mut coeffs: Vec<i64> = vec![1];
    for &l in literals {
        let a = l.abs();
        if a > 1 && !coeffs.contains(&a) {
            coeffs.push(a);
        }
    }
    coeffs.sort_unstable();
    let mut rows = Vec::new();
    let mut push = |row: Vec<i64>| {
        if let Some(c) = canonical_row(row) {
            if !rows.contains(&c) {
                rows.push(c);
            }
        }
    };
    for i in 0..dim {
        let mut r = vec![0; dim];
        r[i] = 1;
        push(r);
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            for &a in &coeffs {
                for &b in &coeffs {
                    for sign in [1i64, -1] {
                        let mut r = vec![0; dim];
                        r[i] = a;
                        r[j] = sign * b;
                        push(r);
                    }
                }
            }
        }
    }
    rows
}

/// Collects the distinct absolute values of integer literals appearing in a
/// program, including mod divisors.
pub fn collect_literals(ts: &crate::program::TransitionSystem) -> Vec<i64> {
    use crate::program::{Expr, Pred, Stmt};
    fn walk_expr(e: &Expr, out: &mut Vec<i64>) {
        match e {
            Expr::Lit(v) => out.push(v.saturating_abs()),
            Expr::Var(_) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                walk_expr(a, out);
                walk_expr(b, out);
            }
            Expr::Neg(a) => walk_expr(a, out),
            Expr::Mod(a, k) => {
                walk_expr(a, out);
                out.push(*k);
            }
        }
    }
    fn walk_pred(p: &Pred, out: &mut Vec<i64>) {
        match p {
            Pred::Bool(_) => {}
            Pred::Cmp(_, a, b) => {
                walk_expr(a, out);
                walk_expr(b, out);
            }
            Pred::And(a, b) | Pred::Or(a, b) => {
                walk_pred(a, out);
                walk_pred(b, out);
            }
            Pred::Not(a) => walk_pred(a, out),
        }
    }
    fn walk_stmt(s: &Stmt, out: &mut Vec<i64>) {
        match s {
            Stmt::Assign(_, e) => walk_expr(e, out),
            Stmt::Seq(ss) => ss.iter().for_each(|s| walk_stmt(s, out)),
            Stmt::If(p, a, b) => {
                walk_pred(p, out);
                walk_stmt(a, out);
                walk_stmt(b, out);
            }
            Stmt::Choice(a, b) => {
                walk_stmt(a, out);
                walk_stmt(b, out);
            }
        }
    }
    let mut out = Vec::new();
    walk_pred(&ts.pre, &mut out);
    walk_pred(&ts.guard, &mut out);
    walk_stmt(&ts.body, &mut out);
    walk_pred(&ts.post, &mut out);
    out.retain(|&v| v != 0);
    out.sort_unstable();
    out.dedup();
    out
}

/// Best rational approximation p/q of `x` with `q <= max_denom`, by
/// continued fractions.
fn continued_fraction(x: f64, max_denom: i64) -> (i64, i64) {
    let mut p0: i64 = 1;
    let mut q0: i64 = 0;
    let mut p1 = x.floor() as i64;
    let mut q1: i64 = 1;
    let mut frac = x - x.floor();
    for _ in 0..64 {
        if frac.abs() < 1e-12 {
            break;
        }
        let r = 1.0 / frac;
        let a = r.floor() as i64;
        frac = r - r.floor();
        let p2 = match a.checked_mul(p1).and_then(|v| v.checked_add(p0)) {
            Some(v) => v,
            None => break,
        };
        let q2 = match a.checked_mul(q1).and_then(|v| v.checked_add(q0)) {
            Some(v) => v,
            None => break,
        };
        if q2 > max_denom {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
    }
    (p1, q1)
}

/// Turns a unit eigenvector into a small primitive integer vector: scale so
/// the largest entry is 1, approximate entries by rationals with small
/// denominators, then clear denominators.
fn rationalize(v: &[f64]) -> Option<Vec<i64>> {
    let max = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if max < 1e-9 {
        return None;
    }
    let mut nums = Vec::with_capacity(v.len());
    let mut denoms = Vec::with_capacity(v.len());
    for &x in v {
        let scaled = x / max;
        let (p, q) = continued_fraction(scaled, 10);
        if q == 0 {
            return None;
        }
        nums.push(p);
        denoms.push(q);
    }
    let lcm = denoms.iter().fold(1i64, |acc, &q| acc / gcd(acc, q) * q);
    let row: Vec<i64> = nums
        .iter()
        .zip(&denoms)
        .map(|(&p, &q)| p * (lcm / q))
        .collect();
    canonical_row(row)
}

/// Data-driven slopes from principal component analysis of the extended
/// sample matrix. Returns the strongest `components` directions followed by
/// near-null directions, which capture exact linear relations in the data.
pub fn pca_slopes(
    sample: &SampleSet,
    meta: &[FeatureMeta],
    components: usize,
) -> Result<Vec<Vec<i64>>, FeatureError> {
    let cols = resolve_meta(meta, &sample.vars)?;
    let d = meta.len();
    let mut data: Vec<Vec<i64>> = Vec::with_capacity(sample.len());
    for (state, _) in sample.labeled() {
        data.push(extended_row(state, &cols)?);
    }
    let n = data.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut mean = vec![0.0f64; d];
    for row in &data {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += x as f64;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = DMatrix::zeros(d, d);
    for row in &data {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += (row[i] as f64 - mean[i]) * (row[j] as f64 - mean[j]) / n as f64;
            }
        }
    }
    let trace: f64 = (0..d).map(|i| cov[(i, i)]).sum();
    let eig = SymmetricEigen::new(cov);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().copied().collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut chosen: Vec<&(f64, Vec<f64>)> = pairs.iter().take(components).collect();
    let null_cut = 1e-6 * trace.max(1e-12);
    let mut nulls: Vec<&(f64, Vec<f64>)> =
        pairs.iter().filter(|(l, _)| *l < null_cut).collect();
    nulls.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    chosen.extend(nulls);
    let mut rows: Vec<Vec<i64>> = Vec::new();
    for (_, v) in chosen {
        if let Some(r) = rationalize(v) {
            if !rows.contains(&r) {
                rows.push(r);
            }
        }
    }
    Ok(rows)
}
