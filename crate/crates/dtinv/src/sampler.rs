//! State sampling by bounded exploration.
//!
//! Good states are loop-head states visited by some run that starts in the
//! precondition, within a box of configurable radius and an iteration budget.
//! Bad states are found by perturbing good states and checking whether the
//! perturbed state can reach a failing loop exit; every state on such a
//! failing path is bad. Exploration enumerates both branches of every
//! `choice`, so it covers all demonic resolutions up to the budget.
//!
//! Sampling runs a schedule of progressively larger bounds and stops as soon
//! as both classes are inhabited. A run that finds a reachable failing state
//! short-circuits to an unsafety witness instead of producing labels.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{eval, step, EvalError, State, TransitionSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Good,
    Bad,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::Good => "good",
            Label::Bad => "bad",
        })
    }
}

/// Bounds for one sampling round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerBounds {
    /// Radius of the start box; initial states range over `[-L, L]` per
    /// variable.
    pub box_radius: i64,
    /// Maximum number of loop iterations explored from each start.
    pub iteration_budget: u32,
    /// Perturbation radius around good states when proposing bad candidates.
    pub margin: i64,
}

impl SamplerBounds {
    pub fn new(box_radius: i64, iteration_budget: u32, margin: i64) -> Self {
        Self { box_radius, iteration_budget, margin }
    }
}

/// Escalation schedule used when the caller does not fix bounds explicitly.
pub fn default_schedule() -> Vec<SamplerBounds> {
    [(2, 16, 1), (4, 32, 2), (8, 64, 3), (16, 128, 3), (32, 256, 3), (32, 512, 3)]
        .into_iter()
        .map(|(l, i, m)| SamplerBounds::new(l, i, m))
        .collect()
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub schedule: Vec<SamplerBounds>,
    /// Cap on the total number of labeled states returned.
    pub max_states: usize,
    /// Recorded for reproducibility of reports. Exploration itself is
    /// exhaustive and deterministic, so the seed does not change results.
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { schedule: default_schedule(), max_states: 100_000, seed: 0 }
    }
}

/// A labeled sample, good states then bad states, each sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSet {
    pub vars: Vec<String>,
    pub good: Vec<State>,
    pub bad: Vec<State>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.good.len() + self.bad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.good.is_empty() && self.bad.is_empty()
    }

    /// All states with their labels, good first.
    pub fn labeled(&self) -> impl Iterator<Item = (&State, Label)> {
        self.good
            .iter()
            .map(|s| (s, Label::Good))
            .chain(self.bad.iter().map(|s| (s, Label::Bad)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SampleOutcome {
    Labeled(SampleSet),
    /// A failing state reachable from the precondition was found, so no
    /// invariant can prove the program safe.
    Unsafe { witness: State },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SamplerError {
    #[error("insufficient samples")]
    InsufficientSamples,
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Per-start budget on explored transitions, guarding against branch
/// explosion from nested `choice`.
const WORK_CAP: usize = 200_000;

struct Exploration {
    /// Loop-head states reached from the start, including the start.
    visited: BTreeSet<State>,
    /// States lying on a path from the start to a failing loop exit.
    failing: BTreeSet<State>,
}

fn is_failing_exit(ts: &TransitionSystem, s: &State) -> Result<bool, EvalError> {
    Ok(!eval(&ts.guard, s)? && !eval(&ts.post, s)?)
}

fn explore(
    ts: &TransitionSystem,
    start: &State,
    iteration_budget: u32,
) -> Result<Exploration, EvalError> {
    let mut visited = BTreeSet::new();
    let mut failing = BTreeSet::new();
    let mut parent: BTreeMap<State, State> = BTreeMap::new();
    visited.insert(start.clone());
    if is_failing_exit(ts, start)? {
        failing.insert(start.clone());
    }
    let mut frontier = vec![start.clone()];
    let mut work = 0usize;
    for _ in 0..iteration_budget {
        let mut next = Vec::new();
        'frontier: for s in &frontier {
            for t in step(ts, s)? {
                work += 1;
                if work > WORK_CAP {
                    break 'frontier;
                }
                if visited.insert(t.clone()) {
                    parent.insert(t.clone(), s.clone());
                    if is_failing_exit(ts, &t)? {
                        let mut cur = t.clone();
                        loop {
                            failing.insert(cur.clone());
                            match parent.get(&cur) {
                                Some(p) => cur = p.clone(),
                                None => break,
                            }
                        }
                    }
                    next.push(t);
                }
            }
        }
        if next.is_empty() || work > WORK_CAP {
            break;
        }
        frontier = next;
    }
    Ok(Exploration { visited, failing })
}

pub(crate) fn enumerate_box(dim: usize, radius: i64) -> impl Iterator<Item = State> {
    let mut cur: Option<Vec<i64>> = Some(vec![-radius; dim]);
    std::iter::from_fn(move || {
        let state = cur.clone()?;
        let mut next = state.clone();
        let mut i = dim;
        loop {
            if i == 0 {
                cur = None;
                break;
            }
            i -= 1;
            if next[i] < radius {
                next[i] += 1;
                for v in next.iter_mut().skip(i + 1) {
                    *v = -radius;
                }
                cur = Some(next);
                break;
            }
        }
        Some(State(state))
    })
}

pub enum GoodSampleOutcome {
    States(BTreeSet<State>),
    Unsafe { witness: State },
}

/// Collects good states for one round. Returns an unsafety witness when a
/// run from the precondition reaches a failing exit.
pub fn sample_good(
    ts: &TransitionSystem,
    bounds: &SamplerBounds,
) -> Result<GoodSampleOutcome, SamplerError> {
    let mut good = BTreeSet::new();
    for start in enumerate_box(ts.dim(), bounds.box_radius) {
        if !eval(&ts.pre, &start)? {
            continue;
        }
        let exp = explore(ts, &start, bounds.iteration_budget)?;
        if let Some(witness) = exp.failing.iter().next() {
            return Ok(GoodSampleOutcome::Unsafe { witness: witness.clone() });
        }
        good.extend(exp.visited);
    }
    Ok(GoodSampleOutcome::States(good))
}

/// Collects bad states by perturbing good states within the margin and
/// exploring each candidate. Every state on a path to a failing exit is bad.
pub fn sample_bad(
    ts: &TransitionSystem,
    good: &BTreeSet<State>,
    bounds: &SamplerBounds,
) -> Result<BTreeSet<State>, SamplerError> {
    let dim = ts.dim();
    let mut candidates = BTreeSet::new();
    for g in good {
        for offset in enumerate_box(dim, bounds.margin) {
            let mut ok = true;
            let mut v = Vec::with_capacity(dim);
            for i in 0..dim {
                match g.0[i].checked_add(offset.0[i]) {
                    Some(x) => v.push(x),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let cand = State(v);
            if !good.contains(&cand) {
                candidates.insert(cand);
            }
        }
    }
    let mut bad = BTreeSet::new();
    for cand in candidates {
        if bad.contains(&cand) {
            continue;
        }
        let exp = explore(ts, &cand, bounds.iteration_budget)?;
        bad.extend(exp.failing);
    }
    Ok(bad)
}

/// Runs the sampling schedule, accumulating states across rounds until both
/// classes are inhabited or the state cap is reached.
pub fn sample(
    ts: &TransitionSystem,
    config: &SamplerConfig,
) -> Result<SampleOutcome, SamplerError> {
    if config.max_states == 0 {
        return Err(SamplerError::InvalidConfig("maxStates must be at least 1".into()));
    }
    let mut good: BTreeSet<State> = BTreeSet::new();
    let mut bad: BTreeSet<State> = BTreeSet::new();
    for bounds in &config.schedule {
        match sample_good(ts, bounds)? {
            GoodSampleOutcome::Unsafe { witness } => {
                return Ok(SampleOutcome::Unsafe { witness });
            }
            GoodSampleOutcome::States(g) => good.extend(g),
        }
        bad.extend(sample_bad(ts, &good, bounds)?);
        if let Some(w) = good.intersection(&bad).next() {
            return Ok(SampleOutcome::Unsafe { witness: w.clone() });
        }
        if (!good.is_empty() && !bad.is_empty()) || good.len() + bad.len() >= config.max_states {
            break;
        }
    }
    if good.is_empty() || bad.is_empty() {
        return Err(SamplerError::InsufficientSamples);
    }
    let mut set = SampleSet {
        vars: ts.vars.clone(),
        good: good.into_iter().take(config.max_states).collect(),
        bad: Vec::new(),
    };
    let room = config.max_states - set.good.len();
    set.bad = bad.into_iter().take(room).collect();
    Ok(SampleOutcome::Labeled(set))
}
