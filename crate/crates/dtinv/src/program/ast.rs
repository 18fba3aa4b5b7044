use std::fmt;

use serde::{Deserialize, Serialize};

/// A point in a program's state space; one value per declared variable, in
/// declaration order. Ordering is lexicographic, which fixes witness and
/// sample enumeration order throughout.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(pub Vec<i64>);

impl State {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CmpOp {
    Le,
    Lt,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Le => a <= b,
            CmpOp::Lt => a < b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

/// Integer expression. Variables are indices into the owning
/// [`TransitionSystem`]'s variable table.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Expr {
    Lit(i64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Euclidean remainder by a positive literal divisor.
    Mod(Box<Expr>, i64),
}

/// Whether an expression contains no variable occurrence.
pub(crate) fn expr_is_const(e: &Expr) -> bool {
    match e {
        Expr::Lit(_) => true,
        Expr::Var(_) => false,
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
            expr_is_const(a) && expr_is_const(b)
        }
        Expr::Neg(a) | Expr::Mod(a, _) => expr_is_const(a),
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Pred {
    Bool(bool),
    Cmp(CmpOp, Expr, Expr),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
    Not(Box<Pred>),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Stmt {
    Assign(usize, Expr),
    Seq(Vec<Stmt>),
    If(Pred, Box<Stmt>, Box<Stmt>),
    Choice(Box<Stmt>, Box<Stmt>),
}

/// A parsed program: variable table, precondition, loop guard, loop body,
/// and postcondition.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TransitionSystem {
    pub vars: Vec<String>,
    pub pre: Pred,
    pub guard: Pred,
    pub body: Stmt,
    pub post: Pred,
}

impl TransitionSystem {
    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }
}

// Rendering back to source. `parse(ts.to_string())` yields a structurally
// identical transition system, which the property tests rely on.

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Lit(_) | Expr::Var(_) | Expr::Neg(_) => 3,
        Expr::Mul(..) | Expr::Mod(..) => 2,
        Expr::Add(..) | Expr::Sub(..) => 1,
    }
}

fn fmt_expr(f: &mut fmt::Formatter<'_>, e: &Expr, vars: &[String], min_prec: u8) -> fmt::Result {
    let wrap = prec(e) < min_prec;
    if wrap {
        write!(f, "(")?;
    }
    match e {
        Expr::Lit(v) => write!(f, "{v}")?,
        Expr::Var(i) => write!(f, "{}", vars[*i])?,
        Expr::Add(a, b) => {
            fmt_expr(f, a, vars, 1)?;
            write!(f, " + ")?;
            fmt_expr(f, b, vars, 2)?;
        }
        Expr::Sub(a, b) => {
            fmt_expr(f, a, vars, 1)?;
            write!(f, " - ")?;
            fmt_expr(f, b, vars, 2)?;
        }
        Expr::Neg(a) => {
            write!(f, "-")?;
            match a.as_ref() {
                Expr::Lit(_) | Expr::Var(_) => fmt_expr(f, a, vars, 3)?,
                _ => {
                    write!(f, "(")?;
                    fmt_expr(f, a, vars, 0)?;
                    write!(f, ")")?;
                }
            }
        }
        Expr::Mul(a, b) => {
            fmt_expr(f, a, vars, 2)?;
            write!(f, " * ")?;
            fmt_expr(f, b, vars, 3)?;
        }
        Expr::Mod(a, k) => {
            fmt_expr(f, a, vars, 2)?;
            write!(f, " mod {k}")?;
        }
    }
    if wrap {
        write!(f, ")")?;
    }
    Ok(())
}

fn pred_prec(p: &Pred) -> u8 {
    match p {
        Pred::Or(..) => 1,
        Pred::And(..) => 2,
        _ => 3,
    }
}

fn fmt_pred(f: &mut fmt::Formatter<'_>, p: &Pred, vars: &[String], min_prec: u8) -> fmt::Result {
    let wrap = pred_prec(p) < min_prec;
    if wrap {
        write!(f, "(")?;
    }
    match p {
        Pred::Bool(b) => write!(f, "{b}")?,
        Pred::Cmp(op, a, b) => {
            fmt_expr(f, a, vars, 1)?;
            write!(f, " {} ", op.symbol())?;
            fmt_expr(f, b, vars, 1)?;
        }
        Pred::And(a, b) => {
            fmt_pred(f, a, vars, 2)?;
            write!(f, " && ")?;
            fmt_pred(f, b, vars, 3)?;
        }
        Pred::Or(a, b) => {
            fmt_pred(f, a, vars, 1)?;
            write!(f, " || ")?;
            fmt_pred(f, b, vars, 2)?;
        }
        Pred::Not(a) => {
            write!(f, "!")?;
            match a.as_ref() {
                Pred::Bool(_) => fmt_pred(f, a, vars, 3)?,
                _ => {
                    write!(f, "(")?;
                    fmt_pred(f, a, vars, 0)?;
                    write!(f, ")")?;
                }
            }
        }
    }
    if wrap {
        write!(f, ")")?;
    }
    Ok(())
}

fn fmt_stmt(f: &mut fmt::Formatter<'_>, s: &Stmt, vars: &[String], indent: usize) -> fmt::Result {
    let pad = "  ".repeat(indent);
    match s {
        Stmt::Assign(i, e) => {
            write!(f, "{pad}{} := ", vars[*i])?;
            fmt_expr(f, e, vars, 0)?;
            writeln!(f, ";")
        }
        Stmt::Seq(stmts) => {
            for st in stmts {
                fmt_stmt(f, st, vars, indent)?;
            }
            Ok(())
        }
        Stmt::If(c, t, e) => {
            write!(f, "{pad}if (")?;
            fmt_pred(f, c, vars, 0)?;
            writeln!(f, ") {{")?;
            fmt_stmt(f, t, vars, indent + 1)?;
            if matches!(e.as_ref(), Stmt::Seq(v) if v.is_empty()) {
                writeln!(f, "{pad}}}")
            } else {
                writeln!(f, "{pad}}} else {{")?;
                fmt_stmt(f, e, vars, indent + 1)?;
                writeln!(f, "{pad}}}")
            }
        }
        Stmt::Choice(a, b) => {
            writeln!(f, "{pad}choice {{")?;
            fmt_stmt(f, a, vars, indent + 1)?;
            writeln!(f, "{pad}}} or {{")?;
            fmt_stmt(f, b, vars, indent + 1)?;
            writeln!(f, "{pad}}}")
        }
    }
}

impl fmt::Display for TransitionSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "var {}: Int;\n", self.vars.join(", "))?;
        write!(f, "assume ")?;
        fmt_pred(f, &self.pre, &self.vars, 0)?;
        writeln!(f, ";")?;
        write!(f, "while (")?;
        fmt_pred(f, &self.guard, &self.vars, 0)?;
        writeln!(f, ") {{")?;
        fmt_stmt(f, &self.body, &self.vars, 1)?;
        writeln!(f, "}}")?;
        write!(f, "assert ")?;
        fmt_pred(f, &self.post, &self.vars, 0)?;
        writeln!(f, ";")
    }
}
