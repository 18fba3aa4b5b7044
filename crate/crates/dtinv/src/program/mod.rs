//! Program model: single-loop integer transition systems.
//!
//! A program has the shape
//!
//! ```text
//! var x, y: Int;
//! assume <pre>;
//! while (<guard>) { <body> }
//! assert <post>;
//! ```
//!
//! with integer assignments, `if`/`else`, and binary `choice { .. } or { .. }`
//! nondeterminism in the body. Assignment right-hand sides are affine (plus
//! `mod` by a positive literal); predicates additionally allow products of
//! variables so quadratic postconditions are expressible.

mod ast;
mod exec;
mod parse;

pub use ast::{CmpOp, Expr, Pred, State, Stmt, TransitionSystem};
pub(crate) use ast::expr_is_const;
pub use exec::{eval, eval_expr, step, EvalError};
pub use parse::{parse, parse_predicate_with_vars, ParseError};
