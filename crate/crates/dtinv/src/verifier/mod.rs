//! Bounded verification of candidate invariants.
//!
//! A candidate f is a safe inductive invariant when three conditions hold:
//! every precondition state satisfies f, every loop step from an f-state
//! lands in an f-state, and every f-state that exits the loop satisfies the
//! postcondition. `check_bounded` checks each condition over the box
//! `[-B, B]` per variable, scanning the whole box for condition one before
//! moving to condition two and then three, so the reported witness always
//! belongs to the earliest violated condition. Successor states are checked
//! even when they land outside the box.

mod smt;

pub use smt::emit_smt;

use crate::program::{eval, step, EvalError, State, TransitionSystem};
use crate::sampler::enumerate_box;

use crate::formula::ResolvedFormula;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Valid { bound: i64 },
    InitViolation { state: State },
    InductionViolation { state: State, successor: State },
    SafetyViolation { state: State },
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Valid { bound } => write!(f, "valid up to bound {bound}"),
            Verdict::InitViolation { state } => {
                write!(f, "initiation fails at {state}")
            }
            Verdict::InductionViolation { state, successor } => {
                write!(f, "induction fails at {state} stepping to {successor}")
            }
            Verdict::SafetyViolation { state } => {
                write!(f, "safety fails at loop exit {state}")
            }
        }
    }
}

/// Checks the three invariant conditions over the centered box of the given
/// radius, one condition at a time.
pub fn check_bounded(
    ts: &TransitionSystem,
    inv: &ResolvedFormula,
    bound: i64,
) -> Result<Verdict, EvalError> {
    let dim = ts.dim();
    for s in enumerate_box(dim, bound) {
        if eval(&ts.pre, &s)? && !inv.eval(&s) {
            return Ok(Verdict::InitViolation { state: s });
        }
    }
    for s in enumerate_box(dim, bound) {
        if !inv.eval(&s) || !eval(&ts.guard, &s)? {
            continue;
        }
        for t in step(ts, &s)? {
            if !inv.eval(&t) {
                return Ok(Verdict::InductionViolation { state: s, successor: t });
            }
        }
    }
    for s in enumerate_box(dim, bound) {
        if inv.eval(&s) && !eval(&ts.guard, &s)? && !eval(&ts.post, &s)? {
            return Ok(Verdict::SafetyViolation { state: s });
        }
    }
    Ok(Verdict::Valid { bound })
}

/// Re-checks a verdict against the program and candidate. Returns true only
/// for genuine violation witnesses; a `Valid` verdict is not a witness.
pub fn replay_witness(
    ts: &TransitionSystem,
    inv: &ResolvedFormula,
    verdict: &Verdict,
) -> Result<bool, EvalError> {
    Ok(match verdict {
        Verdict::Valid { .. } => false,
        Verdict::InitViolation { state } => eval(&ts.pre, state)? && !inv.eval(state),
        Verdict::InductionViolation { state, successor } => {
            inv.eval(state)
                && eval(&ts.guard, state)?
                && step(ts, state)?.contains(successor)
                && !inv.eval(successor)
        }
        Verdict::SafetyViolation { state } => {
            inv.eval(state) && !eval(&ts.guard, state)? && !eval(&ts.post, state)?
        }
    })
}
