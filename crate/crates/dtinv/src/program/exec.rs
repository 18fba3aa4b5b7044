use thiserror::Error;

use super::ast::{Expr, Pred, State, Stmt, TransitionSystem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("arithmetic overflow in `{op}`")]
    Overflow { op: String },
}

/// Evaluates an expression over a state with checked 64-bit arithmetic.
/// `mod` is Euclidean, so the result is always in `[0, k)`.
pub fn eval_expr(e: &Expr, s: &State) -> Result<i64, EvalError> {
    match e {
        Expr::Lit(v) => Ok(*v),
        Expr::Var(i) => Ok(s.0[*i]),
        Expr::Add(a, b) => {
            let (a, b) = (eval_expr(a, s)?, eval_expr(b, s)?);
            a.checked_add(b).ok_or_else(|| EvalError::Overflow { op: format!("{a} + {b}") })
        }
        Expr::Sub(a, b) => {
            let (a, b) = (eval_expr(a, s)?, eval_expr(b, s)?);
            a.checked_sub(b).ok_or_else(|| EvalError::Overflow { op: format!("{a} - {b}") })
        }
        Expr::Mul(a, b) => {
            let (a, b) = (eval_expr(a, s)?, eval_expr(b, s)?);
            a.checked_mul(b).ok_or_else(|| EvalError::Overflow { op: format!("{a} * {b}") })
        }
        Expr::Neg(a) => {
            let a = eval_expr(a, s)?;
            a.checked_neg().ok_or_else(|| EvalError::Overflow { op: format!("-({a})") })
        }
        Expr::Mod(a, k) => Ok(eval_expr(a, s)?.rem_euclid(*k)),
    }
}

/// Evaluates a predicate over a state.
pub fn eval(p: &Pred, s: &State) -> Result<bool, EvalError> {
    match p {
        Pred::Bool(b) => Ok(*b),
        Pred::Cmp(op, a, b) => Ok(op.holds(eval_expr(a, s)?, eval_expr(b, s)?)),
        Pred::And(a, b) => Ok(eval(a, s)? && eval(b, s)?),
        Pred::Or(a, b) => Ok(eval(a, s)? || eval(b, s)?),
        Pred::Not(a) => Ok(!eval(a, s)?),
    }
}

fn exec(stmt: &Stmt, states: Vec<State>) -> Result<Vec<State>, EvalError> {
    match stmt {
        Stmt::Assign(target, rhs) => {
            let mut out = Vec::with_capacity(states.len());
            for mut s in states {
                let v = eval_expr(rhs, &s)?;
                s.0[*target] = v;
                out.push(s);
            }
            Ok(out)
        }
        Stmt::Seq(stmts) => {
            let mut cur = states;
            for st in stmts {
                cur = exec(st, cur)?;
            }
            Ok(cur)
        }
        Stmt::If(cond, then, otherwise) => {
            let mut out = Vec::new();
            for s in states {
                let branch = if eval(cond, &s)? { then } else { otherwise };
                out.extend(exec(branch, vec![s])?);
            }
            Ok(out)
        }
        Stmt::Choice(first, second) => {
            let mut out = Vec::new();
            for s in states {
                out.extend(exec(first, vec![s.clone()])?);
                out.extend(exec(second, vec![s])?);
            }
            Ok(out)
        }
    }
}

/// Computes the successors of a state under one loop iteration. Returns the
/// empty set when the guard does not hold. Successors are deduplicated but
/// keep the order in which the branch structure produces them, first branch
/// first.
pub fn step(ts: &TransitionSystem, s: &State) -> Result<Vec<State>, EvalError> {
    if !eval(&ts.guard, s)? {
        return Ok(Vec::new());
    }
    let raw = exec(&ts.body, vec![s.clone()])?;
    let mut out: Vec<State> = Vec::with_capacity(raw.len());
    for st in raw {
        if !out.contains(&st) {
            out.push(st);
        }
    }
    Ok(out)
}
