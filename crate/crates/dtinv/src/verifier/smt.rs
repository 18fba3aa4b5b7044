//! SMT-LIB emission for unbounded invariant checking.
//!
//! The script contains three push/pop blocks, one per invariant condition,
//! each asserting the condition's negation. The candidate is a safe
//! inductive invariant exactly when all three blocks report unsat.
//!
//! The loop body is executed symbolically into per-variable update
//! expressions. `if` merges branches with `ite` on the branch condition;
//! `choice` merges with `ite` on a fresh Boolean selector, so a satisfying
//! assignment picks the demonic resolution. `mod` is encoded with fresh
//! quotient and remainder constants constrained Euclidean-style, which
//! keeps the script in linear arithmetic; only variable products force
//! nonlinear arithmetic.

use std::fmt::Write;

use crate::formula::{Formula, FormulaError, Rel, Term};
use crate::program::{expr_is_const, CmpOp, Expr, Pred, Stmt, TransitionSystem};

/// Collects block-local declarations and side constraints while rendering.
struct Aux<'a> {
    decls: Vec<String>,
    constraints: Vec<String>,
    counter: usize,
    reserved: &'a [String],
}

impl<'a> Aux<'a> {
    fn new(reserved: &'a [String]) -> Self {
        Self { decls: Vec::new(), constraints: Vec::new(), counter: 0, reserved }
    }

    /// Next index whose names `_<base><i>` are free for every base.
    fn fresh_index(&mut self, bases: &[&str]) -> usize {
        loop {
            let i = self.counter;
            self.counter += 1;
            if bases.iter().all(|b| !self.reserved.contains(&format!("_{b}{i}"))) {
                return i;
            }
        }
    }

    fn fresh(&mut self, base: &str, sort: &str) -> String {
        let name = format!("_{base}{}", self.fresh_index(&[base]));
        self.decls.push(format!("(declare-const {name} {sort})"));
        name
    }

    /// Euclidean remainder of `t` by literal `k` as a fresh constant.
    fn emit_mod(&mut self, t: &str, k: i64) -> String {
        let i = self.fresh_index(&["q", "r"]);
        let (q, r) = (format!("_q{i}"), format!("_r{i}"));
        self.decls.push(format!("(declare-const {q} Int)"));
        self.decls.push(format!("(declare-const {r} Int)"));
        self.constraints.push(format!("(= {t} (+ (* {k} {q}) {r}))"));
        self.constraints.push(format!("(<= 0 {r})"));
        self.constraints.push(format!("(< {r} {k})"));
        r
    }
}

fn smt_int(v: i64) -> String {
    if v < 0 {
        format!("(- {})", v.unsigned_abs())
    } else {
        v.to_string()
    }
}

fn smt_expr(e: &Expr, store: &[String], aux: &mut Aux) -> String {
    match e {
        Expr::Lit(v) => smt_int(*v),
        Expr::Var(i) => store[*i].clone(),
        Expr::Add(a, b) => {
            format!("(+ {} {})", smt_expr(a, store, aux), smt_expr(b, store, aux))
        }
        Expr::Sub(a, b) => {
            format!("(- {} {})", smt_expr(a, store, aux), smt_expr(b, store, aux))
        }
        Expr::Neg(a) => format!("(- {})", smt_expr(a, store, aux)),
        Expr::Mul(a, b) => {
            format!("(* {} {})", smt_expr(a, store, aux), smt_expr(b, store, aux))
        }
        Expr::Mod(a, k) => {
            let inner = smt_expr(a, store, aux);
            aux.emit_mod(&inner, *k)
        }
    }
}

fn smt_pred(p: &Pred, store: &[String], aux: &mut Aux) -> String {
    match p {
        Pred::Bool(true) => "true".to_string(),
        Pred::Bool(false) => "false".to_string(),
        Pred::Cmp(op, a, b) => {
            let (a, b) = (smt_expr(a, store, aux), smt_expr(b, store, aux));
            match op {
                CmpOp::Le => format!("(<= {a} {b})"),
                CmpOp::Lt => format!("(< {a} {b})"),
                CmpOp::Ge => format!("(>= {a} {b})"),
                CmpOp::Gt => format!("(> {a} {b})"),
                CmpOp::Eq => format!("(= {a} {b})"),
                CmpOp::Ne => format!("(distinct {a} {b})"),
            }
        }
        Pred::And(a, b) => {
            format!("(and {} {})", smt_pred(a, store, aux), smt_pred(b, store, aux))
        }
        Pred::Or(a, b) => {
            format!("(or {} {})", smt_pred(a, store, aux), smt_pred(b, store, aux))
        }
        Pred::Not(a) => format!("(not {})", smt_pred(a, store, aux)),
    }
}

fn exec_symbolic(stmt: &Stmt, store: &mut Vec<String>, aux: &mut Aux) {
    match stmt {
        Stmt::Assign(i, e) => {
            store[*i] = smt_expr(e, store, aux);
        }
        Stmt::Seq(stmts) => stmts.iter().for_each(|s| exec_symbolic(s, store, aux)),
        Stmt::If(p, a, b) => {
            let cond = smt_pred(p, store, aux);
            let mut sa = store.clone();
            exec_symbolic(a, &mut sa, aux);
            let mut sb = store.clone();
            exec_symbolic(b, &mut sb, aux);
            for i in 0..store.len() {
                store[i] = if sa[i] == sb[i] {
                    sa[i].clone()
                } else {
                    format!("(ite {cond} {} {})", sa[i], sb[i])
                };
            }
        }
        Stmt::Choice(a, b) => {
            let sel = aux.fresh("sel", "Bool");
            let mut sa = store.clone();
            exec_symbolic(a, &mut sa, aux);
            let mut sb = store.clone();
            exec_symbolic(b, &mut sb, aux);
            for i in 0..store.len() {
                store[i] = if sa[i] == sb[i] {
                    sa[i].clone()
                } else {
                    format!("(ite {sel} {} {})", sa[i], sb[i])
                };
            }
        }
    }
}

fn smt_formula(
    f: &Formula,
    name_of: &dyn Fn(&str) -> String,
    aux: &mut Aux,
) -> Result<String, FormulaError> {
    Ok(match f {
        Formula::True => "true".to_string(),
        Formula::False => "false".to_string(),
        Formula::Atom(atom) => {
            let rendered_terms: Vec<String> = atom
                .terms
                .iter()
                .map(|(c, t)| {
                    let base = match t {
                        Term::Var(v) => name_of(v),
                        Term::Mod { var, modulus } => {
                            let inner = name_of(var);
                            aux.emit_mod(&inner, *modulus)
                        }
                        Term::Product { left, right } => {
                            format!("(* {} {})", name_of(left), name_of(right))
                        }
                    };
                    if *c == 1 {
                        base
                    } else {
                        format!("(* {} {base})", smt_int(*c))
                    }
                })
                .collect();
            let lhs = if rendered_terms.len() == 1 {
                rendered_terms.into_iter().next().unwrap()
            } else {
                format!("(+ {})", rendered_terms.join(" "))
            };
            // Double both sides so half-integer bounds stay in integers.
            let (lhs, bound) = if atom.bound.is_integer() {
                (lhs, smt_int(atom.bound.floor()))
            } else {
                (format!("(* 2 {lhs})"), smt_int(atom.bound.twice()))
            };
            match atom.rel {
                Rel::Le => format!("(<= {lhs} {bound})"),
                Rel::Gt => format!("(> {lhs} {bound})"),
                Rel::Ge => format!("(>= {lhs} {bound})"),
                Rel::Eq => format!("(= {lhs} {bound})"),
                Rel::Ne => format!("(distinct {lhs} {bound})"),
            }
        }
        Formula::And(children) => {
            let parts = children
                .iter()
                .map(|c| smt_formula(c, name_of, aux))
                .collect::<Result<Vec<_>, _>>()?;
            format!("(and {})", parts.join(" "))
        }
        Formula::Or(children) => {
            let parts = children
                .iter()
                .map(|c| smt_formula(c, name_of, aux))
                .collect::<Result<Vec<_>, _>>()?;
            format!("(or {})", parts.join(" "))
        }
        Formula::Not(inner) => format!("(not {})", smt_formula(inner, name_of, aux)?),
    })
}

fn expr_nonlinear(e: &Expr) -> bool {
    match e {
        Expr::Lit(_) | Expr::Var(_) => false,
        Expr::Mul(a, b) => {
            (!expr_is_const(a) && !expr_is_const(b)) || expr_nonlinear(a) || expr_nonlinear(b)
        }
        Expr::Add(a, b) | Expr::Sub(a, b) => expr_nonlinear(a) || expr_nonlinear(b),
        Expr::Neg(a) | Expr::Mod(a, _) => expr_nonlinear(a),
    }
}

fn pred_nonlinear(p: &Pred) -> bool {
    match p {
        Pred::Bool(_) => false,
        Pred::Cmp(_, a, b) => expr_nonlinear(a) || expr_nonlinear(b),
        Pred::And(a, b) | Pred::Or(a, b) => pred_nonlinear(a) || pred_nonlinear(b),
        Pred::Not(a) => pred_nonlinear(a),
    }
}

fn formula_nonlinear(f: &Formula) -> bool {
    match f {
        Formula::True | Formula::False => false,
        Formula::Atom(a) => a.terms.iter().any(|(_, t)| matches!(t, Term::Product { .. })),
        Formula::And(children) | Formula::Or(children) => {
            children.iter().any(formula_nonlinear)
        }
        Formula::Not(inner) => formula_nonlinear(inner),
    }
}

fn needs_nonlinear(ts: &TransitionSystem, inv: &Formula) -> bool {
    pred_nonlinear(&ts.pre)
        || pred_nonlinear(&ts.guard)
        || pred_nonlinear(&ts.post)
        || formula_nonlinear(inv)
}

/// Renders an SMT-LIB script checking the three invariant conditions for
/// the candidate. All three blocks unsat means the candidate is a safe
/// inductive invariant.
pub fn emit_smt(ts: &TransitionSystem, inv: &Formula) -> Result<String, FormulaError> {
    let mut reserved: Vec<String> = ts.vars.clone();
    reserved.extend(ts.vars.iter().map(|v| format!("{v}!")));
    let mut out = String::new();
    let push_block =
        |out: &mut String, comment: &str, parts: Vec<String>, aux: Aux| {
            writeln!(out, "; {comment}").unwrap();
            writeln!(out, "(push 1)").unwrap();
            for d in &aux.decls {
                writeln!(out, "{d}").unwrap();
            }
            let mut all = parts;
            all.extend(aux.constraints);
            writeln!(out, "(assert (and {}))", all.join(" ")).unwrap();
            writeln!(out, "(check-sat)").unwrap();
            writeln!(out, "(get-model)").unwrap();
            writeln!(out, "(pop 1)").unwrap();
        };

    writeln!(out, "; invariant conditions; every block must be unsat").unwrap();
    writeln!(out, "(set-option :produce-models true)").unwrap();
    if needs_nonlinear(ts, inv) {
        writeln!(out, "; variable products require nonlinear arithmetic").unwrap();
        writeln!(out, "(set-logic QF_NIA)").unwrap();
    } else {
        writeln!(out, "(set-logic QF_LIA)").unwrap();
    }
    for v in &ts.vars {
        writeln!(out, "(declare-const {v} Int)").unwrap();
    }
    for v in &ts.vars {
        writeln!(out, "(declare-const {v}! Int)").unwrap();
    }

    let plain = |name: &str| name.to_string();
    let primed = |name: &str| format!("{name}!");
    let store: Vec<String> = ts.vars.clone();

    // Condition 1: every precondition state satisfies the candidate.
    let mut aux = Aux::new(&reserved);
    let pre = smt_pred(&ts.pre, &store, &mut aux);
    let inv_now = smt_formula(inv, &plain, &mut aux)?;
    push_block(
        &mut out,
        "initiation: a precondition state outside the candidate",
        vec![pre, format!("(not {inv_now})")],
        aux,
    );

    // Condition 2: the loop body preserves the candidate.
    let mut aux = Aux::new(&reserved);
    let inv_now = smt_formula(inv, &plain, &mut aux)?;
    let guard = smt_pred(&ts.guard, &store, &mut aux);
    let mut sym_store = store.clone();
    exec_symbolic(&ts.body, &mut sym_store, &mut aux);
    let mut parts = vec![inv_now, guard];
    for (v, e) in ts.vars.iter().zip(&sym_store) {
        parts.push(format!("(= {v}! {e})"));
    }
    let inv_next = smt_formula(inv, &primed, &mut aux)?;
    parts.push(format!("(not {inv_next})"));
    push_block(
        &mut out,
        "consecution: a loop step leaving the candidate",
        parts,
        aux,
    );

    // Condition 3: loop exits from the candidate satisfy the postcondition.
    let mut aux = Aux::new(&reserved);
    let inv_now = smt_formula(inv, &plain, &mut aux)?;
    let guard = smt_pred(&ts.guard, &store, &mut aux);
    let post = smt_pred(&ts.post, &store, &mut aux);
    push_block(
        &mut out,
        "safety: a loop exit violating the postcondition",
        vec![inv_now, format!("(not {guard})"), format!("(not {post})")],
        aux,
    );
    Ok(out)
}
