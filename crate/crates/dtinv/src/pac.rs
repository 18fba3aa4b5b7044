//! Sample-size bounds for probably approximately correct learning.
//!
//! `blumer_bound` is the classic consistent-learner bound: with at least
//! `max(4/eps * ln(2/delta), 8*vc/eps * ln(13/eps))` samples, any hypothesis
//! from a class of the given VC dimension that is consistent with the sample
//! has error at most `eps` with probability at least `1 - delta`.
//!
//! `dt_vc_bound` bounds the VC dimension of threshold decision trees with
//! at most K nodes over d features by `K * d * log2(K)`, rounded up.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PacError {
    #[error("epsilon must lie strictly between 0 and 1, got {0}")]
    BadEpsilon(f64),
    #[error("delta must lie strictly between 0 and 1, got {0}")]
    BadDelta(f64),
    #[error("VC dimension must be at least 1, got {0}")]
    BadVc(u64),
    #[error("node budget must be at least 2, got {0}")]
    BadNodes(usize),
    #[error("dimension must be at least 1, got {0}")]
    BadDim(usize),
}

fn check_eps_delta(epsilon: f64, delta: f64) -> Result<(), PacError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(PacError::BadEpsilon(epsilon));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PacError::BadDelta(delta));
    }
    Ok(())
}

/// Samples sufficient for a consistent learner over a class of VC dimension
/// `vc` to be `(epsilon, delta)`-accurate.
pub fn blumer_bound(epsilon: f64, delta: f64, vc: u64) -> Result<u64, PacError> {
    check_eps_delta(epsilon, delta)?;
    if vc == 0 {
        return Err(PacError::BadVc(vc));
    }
    let t1 = 4.0 / epsilon * (2.0 / delta).ln();
    let t2 = 8.0 * vc as f64 / epsilon * (13.0 / epsilon).ln();
    Ok(t1.max(t2).ceil() as u64)
}

/// VC dimension bound for decision trees with at most `max_nodes` nodes
/// splitting on thresholds over `dim` features.
pub fn dt_vc_bound(max_nodes: usize, dim: usize) -> Result<u64, PacError> {
    if max_nodes < 2 {
        return Err(PacError::BadNodes(max_nodes));
    }
    if dim == 0 {
        return Err(PacError::BadDim(dim));
    }
    let k = max_nodes as f64;
    Ok((k * dim as f64 * k.log2()).ceil() as u64)
}

/// Samples sufficient for tree learning to be `(epsilon, delta)`-accurate:
/// the consistent-learner bound at the tree-class VC dimension.
pub fn sample_size_for(
    epsilon: f64,
    delta: f64,
    max_nodes: usize,
    dim: usize,
) -> Result<u64, PacError> {
    blumer_bound(epsilon, delta, dt_vc_bound(max_nodes, dim)?)
}
