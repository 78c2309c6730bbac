//! ε-approximate pre-opacity-preserving simulation relations.
//!
//! A relation R between the states of two systems preserves pre-opacity
//! verdicts across an output gap of ε when it satisfies:
//!
//! - **1a/1b** every initial state of either system is related to some
//!   initial state of the other;
//! - **2** related states have outputs within ε, in the infinity norm;
//! - **3a** every successor of the left state is matched by some successor
//!   of the right state, with the results related (inputs unconstrained —
//!   the two systems need not share an input alphabet);
//! - **3b** symmetrically, every successor of the right state is matched by
//!   some successor of the left;
//! - **3c** every *non-secret* successor of the right state is matched by
//!   some *non-secret* successor of the left, again related. This is
//!   independent of 3b: the 3b witness may be secret even when a
//!   non-secret match is required to carry "ends non-secret" claims back.
//!
//! A verdict "the right system is δ-approximately K-step pre-opaque"
//! transfers to the left system at δ + 2ε: one ε to map the left run
//! forward, one to map the revealing-free right run back.

use crate::estimator::require_clean;
use crate::model::{output_distance, MetricSystem};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RelationError {
    #[error("epsilon must be a non-negative finite real, got {0}")]
    InvalidEpsilon(f64),
    #[error("delta must be a non-negative finite real, got {0}")]
    InvalidDelta(f64),
    #[error("{side} system fails validation: {detail}")]
    InvalidSystem { side: &'static str, detail: String },
    #[error("the systems have different output dimensions: {left} vs {right}")]
    OutputDimensionMismatch { left: usize, right: usize },
    #[error("relation refers to unknown {side} state '{id}'")]
    UnknownState { side: &'static str, id: String },
}

/// A relation as a set of (left id, right id) pairs. Serializes as a JSON
/// array of `{"a": …, "b": …}` objects.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RelationPairs {
    pairs: BTreeSet<(String, String)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairEntry {
    a: String,
    b: String,
}

impl RelationPairs {
    pub fn from_pairs<I, S>(pairs: I) -> RelationPairs
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        RelationPairs {
            pairs: pairs
                .into_iter()
                .map(|(a, b)| (a.into(), b.into()))
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<RelationPairs, serde_json::Error> {
        let entries: Vec<PairEntry> = serde_json::from_str(text)?;
        Ok(RelationPairs {
            pairs: entries.into_iter().map(|e| (e.a, e.b)).collect(),
        })
    }

    pub fn to_json(&self) -> String {
        let entries: Vec<PairEntry> = self
            .pairs
            .iter()
            .map(|(a, b)| PairEntry {
                a: a.clone(),
                b: b.clone(),
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&entries).expect("pairs serialize");
        s.push('\n');
        s
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        self.pairs.contains(&(a.to_string(), b.to_string()))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(String, String)> {
        self.pairs.iter()
    }

    pub fn union(&self, other: &RelationPairs) -> RelationPairs {
        RelationPairs {
            pairs: self.pairs.union(&other.pairs).cloned().collect(),
        }
    }

    pub fn is_subset_of(&self, other: &RelationPairs) -> bool {
        self.pairs.is_subset(&other.pairs)
    }
}

/// Which condition a violation or failure refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AkpCondition {
    #[serde(rename = "1a")]
    InitialLeft,
    #[serde(rename = "1b")]
    InitialRight,
    #[serde(rename = "2")]
    OutputCloseness,
    #[serde(rename = "3a")]
    ForwardStep,
    #[serde(rename = "3b")]
    BackwardStep,
    #[serde(rename = "3c")]
    NonSecretBackwardStep,
}

impl std::fmt::Display for AkpCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let label = match self {
            AkpCondition::InitialLeft => "1a",
            AkpCondition::InitialRight => "1b",
            AkpCondition::OutputCloseness => "2",
            AkpCondition::ForwardStep => "3a",
            AkpCondition::BackwardStep => "3b",
            AkpCondition::NonSecretBackwardStep => "3c",
        };
        f.write_str(label)
    }
}

/// One way a given relation falls short of the definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "condition")]
pub enum RelationViolation {
    /// 1a: this initial left state is related to no initial right state.
    #[serde(rename = "1a")]
    UnmatchedInitialLeft { state: String },
    /// 1b: this initial right state is related to no initial left state.
    #[serde(rename = "1b")]
    UnmatchedInitialRight { state: String },
    /// 2: a related pair with outputs further than ε apart.
    #[serde(rename = "2")]
    OutputTooFar { a: String, b: String, distance: f64 },
    /// 3a: a left successor no right successor can match.
    #[serde(rename = "3a")]
    UnmatchedLeftSuccessor { a: String, b: String, a_succ: String },
    /// 3b: a right successor no left successor can match.
    #[serde(rename = "3b")]
    UnmatchedRightSuccessor { a: String, b: String, b_succ: String },
    /// 3c: a non-secret right successor no non-secret left successor can match.
    #[serde(rename = "3c")]
    UnmatchedNonSecretSuccessor { a: String, b: String, b_succ: String },
}

impl RelationViolation {
    pub fn condition(&self) -> AkpCondition {
        match self {
            RelationViolation::UnmatchedInitialLeft { .. } => AkpCondition::InitialLeft,
            RelationViolation::UnmatchedInitialRight { .. } => AkpCondition::InitialRight,
            RelationViolation::OutputTooFar { .. } => AkpCondition::OutputCloseness,
            RelationViolation::UnmatchedLeftSuccessor { .. } => AkpCondition::ForwardStep,
            RelationViolation::UnmatchedRightSuccessor { .. } => AkpCondition::BackwardStep,
            RelationViolation::UnmatchedNonSecretSuccessor { .. } => {
                AkpCondition::NonSecretBackwardStep
            }
        }
    }
}

impl fmt::Display for RelationViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelationViolation::UnmatchedInitialLeft { state } => write!(
                f,
                "condition 1a: initial left state {state} is related to no initial right state"
            ),
            RelationViolation::UnmatchedInitialRight { state } => write!(
                f,
                "condition 1b: initial right state {state} is related to no initial left state"
            ),
            RelationViolation::OutputTooFar { a, b, distance } => write!(
                f,
                "condition 2: related pair ({a}, {b}) has output distance {distance}"
            ),
            RelationViolation::UnmatchedLeftSuccessor { a, b, a_succ } => write!(
                f,
                "condition 3a: at ({a}, {b}), left successor {a_succ} has no related right successor"
            ),
            RelationViolation::UnmatchedRightSuccessor { a, b, b_succ } => write!(
                f,
                "condition 3b: at ({a}, {b}), right successor {b_succ} has no related left successor"
            ),
            RelationViolation::UnmatchedNonSecretSuccessor { a, b, b_succ } => write!(
                f,
                "condition 3c: at ({a}, {b}), non-secret right successor {b_succ} has no \
                 related non-secret left successor"
            ),
        }
    }
}

/// Outcome of the greatest-fixpoint computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AkpResult {
    pub related: bool,
    pub epsilon: f64,
    /// The greatest relation satisfying 2/3a/3b/3c — reported even when the
    /// initial conditions fail, so the caller can see how close it came.
    pub relation: RelationPairs,
    /// First initial-matching failure when `related` is false.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<AkpFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AkpFailure {
    pub condition: AkpCondition,
    pub state: String,
}

impl Serialize for RelationPairs {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = serializer.serialize_seq(Some(self.pairs.len()))?;
        for (a, b) in &self.pairs {
            seq.serialize_element(&PairEntry {
                a: a.clone(),
                b: b.clone(),
            })?;
        }
        seq.end()
    }
}

struct Ctx<'s> {
    a: &'s MetricSystem,
    b: &'s MetricSystem,
    // all-input successor lists per state
    succ_a: Vec<Vec<u32>>,
    succ_b: Vec<Vec<u32>>,
}

fn prepare<'s>(
    a: &'s MetricSystem,
    b: &'s MetricSystem,
    eps: f64,
) -> Result<Ctx<'s>, RelationError> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(RelationError::InvalidEpsilon(eps));
    }
    require_clean(a).map_err(|e| RelationError::InvalidSystem {
        side: "left",
        detail: e.to_string(),
    })?;
    require_clean(b).map_err(|e| RelationError::InvalidSystem {
        side: "right",
        detail: e.to_string(),
    })?;
    let dim_a = a.output(0).dim();
    let dim_b = b.output(0).dim();
    if dim_a != dim_b {
        return Err(RelationError::OutputDimensionMismatch {
            left: dim_a,
            right: dim_b,
        });
    }
    Ok(Ctx {
        a,
        b,
        succ_a: (0..a.state_count() as u32)
            .map(|x| a.all_successor_indices(x))
            .collect(),
        succ_b: (0..b.state_count() as u32)
            .map(|x| b.all_successor_indices(x))
            .collect(),
    })
}

fn pair_distance(ctx: &Ctx, ia: u32, ib: u32) -> f64 {
    output_distance(ctx.a.output(ia), ctx.b.output(ib)).expect("dimensions checked")
}

/// All pairs within ε in output — the seed every valid relation must live
/// inside, by condition 2.
pub fn candidate_relation(
    a: &MetricSystem,
    b: &MetricSystem,
    eps: f64,
) -> Result<RelationPairs, RelationError> {
    let ctx = prepare(a, b, eps)?;
    let mut pairs = BTreeSet::new();
    for ia in 0..a.state_count() as u32 {
        for ib in 0..b.state_count() as u32 {
            if pair_distance(&ctx, ia, ib) <= eps {
                pairs.insert((a.state_id(ia).to_string(), b.state_id(ib).to_string()));
            }
        }
    }
    Ok(RelationPairs { pairs })
}

// matrix[ia * nb + ib]
fn fixpoint(ctx: &Ctx, eps: f64) -> Vec<bool> {
    let na = ctx.a.state_count();
    let nb = ctx.b.state_count();
    let mut rel = vec![false; na * nb];
    for ia in 0..na as u32 {
        for ib in 0..nb as u32 {
            rel[ia as usize * nb + ib as usize] = pair_distance(ctx, ia, ib) <= eps;
        }
    }
    // delete-and-propagate until no pair violates 3a, 3b, or 3c
    loop {
        let mut changed = false;
        for ia in 0..na as u32 {
            for ib in 0..nb as u32 {
                let idx = ia as usize * nb + ib as usize;
                if !rel[idx] {
                    continue;
                }
                if !step_conditions_hold(ctx, &rel, nb, ia, ib) {
                    rel[idx] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    rel
}

fn step_conditions_hold(ctx: &Ctx, rel: &[bool], nb: usize, ia: u32, ib: u32) -> bool {
    // 3a
    for &an in &ctx.succ_a[ia as usize] {
        if !ctx.succ_b[ib as usize]
            .iter()
            .any(|&bn| rel[an as usize * nb + bn as usize])
        {
            return false;
        }
    }
    // 3b
    for &bn in &ctx.succ_b[ib as usize] {
        if !ctx.succ_a[ia as usize]
            .iter()
            .any(|&an| rel[an as usize * nb + bn as usize])
        {
            return false;
        }
    }
    // 3c
    for &bn in &ctx.succ_b[ib as usize] {
        if ctx.b.is_secret(bn) {
            continue;
        }
        if !ctx.succ_a[ia as usize]
            .iter()
            .any(|&an| !ctx.a.is_secret(an) && rel[an as usize * nb + bn as usize])
        {
            return false;
        }
    }
    true
}

/// Computes the greatest relation satisfying conditions 2/3a/3b/3c and then
/// checks the initial conditions 1a/1b against it. Because every valid
/// relation is closed under the same deletion test, the result contains
/// every relation any prover could exhibit — if this one fails 1a/1b, none
/// exists.
pub fn max_akp_relation(
    a: &MetricSystem,
    b: &MetricSystem,
    eps: f64,
) -> Result<AkpResult, RelationError> {
    let ctx = prepare(a, b, eps)?;
    let nb = b.state_count();
    let rel = fixpoint(&ctx, eps);

    let mut failure = None;
    for &ia in a.states_by_name() {
        if !a.is_initial(ia) {
            continue;
        }
        let matched = b
            .initial_indices()
            .iter()
            .any(|&ib| rel[ia as usize * nb + ib as usize]);
        if !matched {
            failure = Some(AkpFailure {
                condition: AkpCondition::InitialLeft,
                state: a.state_id(ia).to_string(),
            });
            break;
        }
    }
    if failure.is_none() {
        for &ib in b.states_by_name() {
            if !b.is_initial(ib) {
                continue;
            }
            let matched = a
                .initial_indices()
                .iter()
                .any(|&ia| rel[ia as usize * nb + ib as usize]);
            if !matched {
                failure = Some(AkpFailure {
                    condition: AkpCondition::InitialRight,
                    state: b.state_id(ib).to_string(),
                });
                break;
            }
        }
    }

    let mut pairs = BTreeSet::new();
    for ia in 0..a.state_count() as u32 {
        for ib in 0..nb as u32 {
            if rel[ia as usize * nb + ib as usize] {
                pairs.insert((a.state_id(ia).to_string(), b.state_id(ib).to_string()));
            }
        }
    }
    Ok(AkpResult {
        related: failure.is_none(),
        epsilon: eps,
        relation: RelationPairs { pairs },
        failure,
    })
}

/// Checks a user-supplied relation against every condition and reports all
/// violations, deterministically ordered. An empty result means the
/// relation is a valid witness.
pub fn check_relation(
    a: &MetricSystem,
    b: &MetricSystem,
    eps: f64,
    relation: &RelationPairs,
) -> Result<Vec<RelationViolation>, RelationError> {
    let ctx = prepare(a, b, eps)?;
    let nb = b.state_count();
    let mut rel = vec![false; a.state_count() * nb];
    for (pa, pb) in &relation.pairs {
        let ia = a.index_of_state(pa).map_err(|_| RelationError::UnknownState {
            side: "left",
            id: pa.clone(),
        })?;
        let ib = b.index_of_state(pb).map_err(|_| RelationError::UnknownState {
            side: "right",
            id: pb.clone(),
        })?;
        rel[ia as usize * nb + ib as usize] = true;
    }

    let mut violations = Vec::new();
    for &ia in a.states_by_name() {
        if !a.is_initial(ia) {
            continue;
        }
        if !b
            .initial_indices()
            .iter()
            .any(|&ib| rel[ia as usize * nb + ib as usize])
        {
            violations.push(RelationViolation::UnmatchedInitialLeft {
                state: a.state_id(ia).to_string(),
            });
        }
    }
    for &ib in b.states_by_name() {
        if !b.is_initial(ib) {
            continue;
        }
        if !a
            .initial_indices()
            .iter()
            .any(|&ia| rel[ia as usize * nb + ib as usize])
        {
            violations.push(RelationViolation::UnmatchedInitialRight {
                state: b.state_id(ib).to_string(),
            });
        }
    }

    for (pa, pb) in &relation.pairs {
        let ia = a.index_of_state(pa).expect("validated above");
        let ib = b.index_of_state(pb).expect("validated above");
        let d = pair_distance(&ctx, ia, ib);
        if d > eps {
            violations.push(RelationViolation::OutputTooFar {
                a: pa.clone(),
                b: pb.clone(),
                distance: d,
            });
        }
        for &an in &ctx.succ_a[ia as usize] {
            if !ctx.succ_b[ib as usize]
                .iter()
                .any(|&bn| rel[an as usize * nb + bn as usize])
            {
                violations.push(RelationViolation::UnmatchedLeftSuccessor {
                    a: pa.clone(),
                    b: pb.clone(),
                    a_succ: a.state_id(an).to_string(),
                });
            }
        }
        for &bn in &ctx.succ_b[ib as usize] {
            if !ctx.succ_a[ia as usize]
                .iter()
                .any(|&an| rel[an as usize * nb + bn as usize])
            {
                violations.push(RelationViolation::UnmatchedRightSuccessor {
                    a: pa.clone(),
                    b: pb.clone(),
                    b_succ: b.state_id(bn).to_string(),
                });
            }
        }
        for &bn in &ctx.succ_b[ib as usize] {
            if ctx.b.is_secret(bn) {
                continue;
            }
            if !ctx.succ_a[ia as usize]
                .iter()
                .any(|&an| !ctx.a.is_secret(an) && rel[an as usize * nb + bn as usize])
            {
                violations.push(RelationViolation::UnmatchedNonSecretSuccessor {
                    a: pa.clone(),
                    b: pb.clone(),
                    b_succ: b.state_id(bn).to_string(),
                });
            }
        }
    }
    Ok(violations)
}

/// The guarantee that crosses the relation: a δ_b-approximate K-step
/// pre-opacity verdict on the right system holds for the left system at
/// `δ_b + 2ε`.
pub fn transfer_verdict(delta_b: f64, eps: f64) -> Result<f64, RelationError> {
    if !(delta_b.is_finite() && delta_b >= 0.0) {
        return Err(RelationError::InvalidDelta(delta_b));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(RelationError::InvalidEpsilon(eps));
    }
    Ok(delta_b + 2.0 * eps)
}
