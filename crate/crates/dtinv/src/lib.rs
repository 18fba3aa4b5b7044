//! Invariant inference for single-loop integer programs.
//!
//! The pipeline samples reachable ("good") and assertion-violating ("bad")
//! loop-head states, projects them through a matrix of candidate slope
//! vectors, learns a decision tree separating the two classes, reads the
//! tree back as a quantifier-free formula, and checks that the formula is
//! a safe inductive invariant.

pub mod dtlearn;
pub mod features;
pub mod formula;
pub mod io;
pub mod pac;
pub mod pipeline;
pub mod program;
pub mod rational;
pub mod sampler;
pub mod suite;
pub mod verifier;
