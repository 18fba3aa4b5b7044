//! End-to-end inference: sample, transform, learn, convert, verify.
//!
//! There is no refinement loop. When bounded verification refutes the
//! candidate, the run reports the witness and the candidate so the caller
//! can resample with wider bounds.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtlearn::{learn, LearnError, SplitCriterion};
use crate::features::{
    collect_literals, constant_slopes, extended_meta, octagon_slopes, pca_slopes, transform,
    AugmentTerm, FeatureError, SlopeMatrix,
};
use crate::formula::{count_predicates, dt_to_form, resolve, simplify, Formula, FormulaError};
use crate::program::{EvalError, Expr, Pred, State, Stmt, TransitionSystem};
use crate::sampler::{sample, SampleOutcome, SamplerConfig, SamplerError};
use crate::verifier::{check_bounded, emit_smt, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeDomain {
    Octagon,
    Constants,
    Pca { components: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AugmentPolicy {
    /// Add a column for every `mod` term the program applies to a variable.
    Auto,
    /// Raw program variables only.
    None,
    Explicit(Vec<AugmentTerm>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyMode {
    Bounded { bound: i64 },
    EmitSmt,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub sampler: SamplerConfig,
    pub domain: SlopeDomain,
    pub augment: AugmentPolicy,
    pub criterion: SplitCriterion,
    pub max_nodes: usize,
    pub verify: VerifyMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            domain: SlopeDomain::Octagon,
            augment: AugmentPolicy::Auto,
            criterion: SplitCriterion::Gini,
            max_nodes: 63,
            verify: VerifyMode::Bounded { bound: 50 },
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("sampling: {0}")]
    Sampler(#[from] SamplerError),
    #[error("feature transform: {0}")]
    Feature(#[from] FeatureError),
    #[error("tree learning: {0}")]
    Learn(#[from] LearnError),
    #[error("formula construction: {0}")]
    Formula(#[from] FormulaError),
    #[error("verification: {0}")]
    Eval(#[from] EvalError),
}

/// Per-stage wall times in whole milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTimes {
    pub sample: u64,
    pub transform: u64,
    pub learn: u64,
    pub formula: u64,
    pub verify: u64,
    pub total: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub program: String,
    pub vars: Vec<String>,
    pub good_states: usize,
    pub bad_states: usize,
    pub features: usize,
    pub tree_nodes: usize,
    pub predicates: usize,
    pub formula: String,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<State>,
    pub times_ms: StageTimes,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InferOutcome {
    Verified { formula: Formula, bound: i64 },
    /// Bounded verification refuted the candidate; the witness is in the
    /// verdict.
    Refuted { formula: Formula, verdict: Verdict },
    /// Verification conditions were emitted for an external solver instead
    /// of being checked here.
    Emitted { formula: Formula, smt: String },
    /// The program itself is unsafe; no invariant exists.
    Unsafe { witness: State },
}

#[derive(Debug, Clone)]
pub struct InferResult {
    pub outcome: InferOutcome,
    pub report: RunReport,
}

fn ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

fn collect_expr_mods(e: &Expr, vars: &[String], out: &mut Vec<AugmentTerm>) {
    match e {
        Expr::Lit(_) | Expr::Var(_) => {}
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
            collect_expr_mods(a, vars, out);
            collect_expr_mods(b, vars, out);
        }
        Expr::Neg(a) => collect_expr_mods(a, vars, out),
        Expr::Mod(a, k) => {
            if (2..=10).contains(k) {
                let mut idx = Vec::new();
                collect_expr_vars(a, &mut idx);
                for i in idx {
                    let t = AugmentTerm::Mod(vars[i].clone(), *k);
                    if !out.contains(&t) {
                        out.push(t);
                    }
                }
            }
            collect_expr_mods(a, vars, out);
        }
    }
}

fn collect_expr_vars(e: &Expr, out: &mut Vec<usize>) {
    match e {
        Expr::Lit(_) => {}
        Expr::Var(i) => {
            if !out.contains(i) {
                out.push(*i);
            }
        }
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
            collect_expr_vars(a, out);
            collect_expr_vars(b, out);
        }
        Expr::Neg(a) | Expr::Mod(a, _) => collect_expr_vars(a, out),
    }
}

fn collect_pred_mods(p: &Pred, vars: &[String], out: &mut Vec<AugmentTerm>) {
    match p {
        Pred::Bool(_) => {}
        Pred::Cmp(_, a, b) => {
            collect_expr_mods(a, vars, out);
            collect_expr_mods(b, vars, out);
        }
        Pred::And(a, b) | Pred::Or(a, b) => {
            collect_pred_mods(a, vars, out);
            collect_pred_mods(b, vars, out);
        }
        Pred::Not(a) => collect_pred_mods(a, vars, out),
    }
}

fn collect_stmt_mods(s: &Stmt, vars: &[String], out: &mut Vec<AugmentTerm>) {
    match s {
        Stmt::Assign(_, e) => collect_expr_mods(e, vars, out),
        Stmt::Seq(parts) => {
            for p in parts {
                collect_stmt_mods(p, vars, out);
            }
        }
        Stmt::If(c, a, b) => {
            collect_pred_mods(c, vars, out);
            collect_stmt_mods(a, vars, out);
            collect_stmt_mods(b, vars, out);
        }
        Stmt::Choice(a, b) => {
            collect_stmt_mods(a, vars, out);
            collect_stmt_mods(b, vars, out);
        }
    }
}

/// Finds every `v mod k` the program computes with `2 <= k <= 10`, in
/// first-occurrence order.
pub fn detect_mod_terms(ts: &TransitionSystem) -> Vec<AugmentTerm> {
    let mut out = Vec::new();
    collect_pred_mods(&ts.pre, &ts.vars, &mut out);
    collect_pred_mods(&ts.guard, &ts.vars, &mut out);
    collect_stmt_mods(&ts.body, &ts.vars, &mut out);
    collect_pred_mods(&ts.post, &ts.vars, &mut out);
    out
}

fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::Valid { .. } => "verified",
        Verdict::InitViolation { .. } => "init-violation",
        Verdict::InductionViolation { .. } => "induction-violation",
        Verdict::SafetyViolation { .. } => "safety-violation",
    }
}

fn verdict_witness(v: &Verdict) -> Option<State> {
    match v {
        Verdict::Valid { .. } => None,
        Verdict::InitViolation { state }
        | Verdict::InductionViolation { state, .. }
        | Verdict::SafetyViolation { state } => Some(state.clone()),
    }
}

/// Runs the whole pipeline on one program.
pub fn infer_invariant(
    ts: &TransitionSystem,
    program: &str,
    config: &PipelineConfig,
) -> Result<InferResult, PipelineError> {
    let run_start = Instant::now();
    let mut times = StageTimes::default();
    let mut report = RunReport {
        program: program.to_string(),
        vars: ts.vars.clone(),
        good_states: 0,
        bad_states: 0,
        features: 0,
        tree_nodes: 0,
        predicates: 0,
        formula: String::new(),
        verdict: String::new(),
        bound: None,
        witness: None,
        times_ms: times,
        seed: config.sampler.seed,
    };

    let stage = Instant::now();
    let sampled = sample(ts, &config.sampler)?;
    times.sample = ms(stage);

    let sample_set = match sampled {
        SampleOutcome::Unsafe { witness } => {
            times.total = ms(run_start);
            report.verdict = "unsafe".to_string();
            report.witness = Some(witness.clone());
            report.times_ms = times;
            return Ok(InferResult { outcome: InferOutcome::Unsafe { witness }, report });
        }
        SampleOutcome::Labeled(s) => s,
    };
    report.good_states = sample_set.good.len();
    report.bad_states = sample_set.bad.len();

    let stage = Instant::now();
    let augment = match &config.augment {
        AugmentPolicy::Auto => detect_mod_terms(ts),
        AugmentPolicy::None => Vec::new(),
        AugmentPolicy::Explicit(terms) => terms.clone(),
    };
    let meta = extended_meta(&ts.vars, &augment)?;
    let h = match config.domain {
        SlopeDomain::Octagon => octagon_slopes(meta.len()),
        SlopeDomain::Constants => constant_slopes(meta.len(), &collect_literals(ts)),
        SlopeDomain::Pca { components } => pca_slopes(&sample_set, &meta, components)?,
    };
    let slopes = SlopeMatrix::new(h, meta)?;
    let z = transform(&sample_set, &slopes)?;
    times.transform = ms(stage);
    report.features = slopes.num_features();

    let stage = Instant::now();
    let tree = learn(&z, config.criterion, config.max_nodes)?;
    times.learn = ms(stage);
    report.tree_nodes = tree.node_count();

    let stage = Instant::now();
    let candidate = simplify(&dt_to_form(&tree, &slopes)?)?;
    times.formula = ms(stage);
    report.predicates = count_predicates(&candidate);
    report.formula = candidate.to_string();

    match config.verify {
        VerifyMode::Bounded { bound } => {
            let stage = Instant::now();
            let resolved = resolve(&candidate, &ts.vars)?;
            let verdict = check_bounded(ts, &resolved, bound)?;
            times.verify = ms(stage);
            times.total = ms(run_start);
            report.verdict = verdict_name(&verdict).to_string();
            report.witness = verdict_witness(&verdict);
            report.times_ms = times;
            let outcome = match verdict {
                Verdict::Valid { bound } => {
                    report.bound = Some(bound);
                    InferOutcome::Verified { formula: candidate, bound }
                }
                other => InferOutcome::Refuted { formula: candidate, verdict: other },
            };
            Ok(InferResult { outcome, report })
        }
        VerifyMode::EmitSmt => {
            let stage = Instant::now();
            let smt = emit_smt(ts, &candidate)?;
            times.verify = ms(stage);
            times.total = ms(run_start);
            report.verdict = "smt-emitted".to_string();
            report.times_ms = times;
            Ok(InferResult {
                outcome: InferOutcome::Emitted { formula: candidate, smt },
                report,
            })
        }
    }
}
