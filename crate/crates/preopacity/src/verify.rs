//! Deciding δ-approximate K-step pre-opacity.
//!
//! The secret is revealed if, after some observed prefix, the intruder can
//! be *certain* that every possible continuation is in a secret state in
//! exactly t more steps, for some t ≥ K. "Certain" means the whole current
//! estimate lies inside the indicator set T_t — the states all of whose
//! length-t continuations end secret. Because T is computed by iterating a
//! deterministic set operator, the check over all t ≥ K collapses to a
//! single comparison against T_K on every reachable estimator node.
//!
//! Caveat, by design: a deadlocked state has no length-t continuations for
//! t ≥ 1, so it sits in every T_t vacuously. On systems with deadlocks the
//! fixed-t semantics and this check can genuinely part ways; validation
//! warns about deadlocks and the verdict records them.

use crate::estimator::{build_observer, require_clean, EstimatorError, Observer};
use crate::model::MetricSystem;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("verdict already shows the property holds; there is no witness to extract")]
    NoWitness,
    #[error("unknown state '{0}' in query")]
    UnknownState(String),
}

/// `T_n` with its members named: the states from which every length-n
/// continuation ends in a secret state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorSet {
    pub n: u32,
    pub members: BTreeSet<String>,
}

/// One step of a revealing run, as reported to the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessStep {
    pub state: String,
    /// Input taken to reach this state; `None` on the first step.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub input: Option<String>,
    /// The intruder's estimate after observing up to this state.
    pub estimate: Vec<String>,
}

/// The result of a verification query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub holds: bool,
    pub delta: f64,
    pub k: u32,
    /// Size of the state space the decision walked: estimator-product nodes
    /// (or explored (state, consistent-set) pairs for the oracle).
    pub observer_nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<Vec<WitnessStep>>,
    /// Deadlocked states, copied from validation warnings; nonempty means
    /// the caveat in the module docs applies.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub deadlocks: Vec<String>,
    /// `"oracle"` when produced by the semantic reference check.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub method: Option<String>,
}

impl Verdict {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("verdict serializes");
        s.push('\n');
        s
    }
}

/// Indicator sets as index bitmasks; `backward[x]` = all-successors-in test.
pub(crate) fn backward_step(sys: &MetricSystem, current: &[bool]) -> Vec<bool> {
    let n = sys.state_count();
    let mut out = vec![false; n];
    for x in 0..n as u32 {
        // vacuously true at deadlocks: no successor escapes
        out[x as usize] = (0..sys.input_count() as u32)
            .flat_map(|u| sys.successor_indices(x, u))
            .all(|&xn| current[xn as usize]);
    }
    out
}

/// The backward certainty operator `F(Q)`: states whose every successor,
/// under every input, lies in `Q`. Deadlocked states are included
/// vacuously.
pub fn backward_operator(
    sys: &MetricSystem,
    q: &BTreeSet<String>,
) -> Result<BTreeSet<String>, VerifyError> {
    let mut mask = vec![false; sys.state_count()];
    for id in q {
        let i = sys
            .index_of_state(id)
            .map_err(|_| VerifyError::UnknownState(id.clone()))?;
        mask[i as usize] = true;
    }
    let next = backward_step(sys, &mask);
    Ok((0..sys.state_count() as u32)
        .filter(|&i| next[i as usize])
        .map(|i| sys.state_id(i).to_string())
        .collect())
}

/// `T_n = F^n(X_S)` as index masks, short-circuiting once the iteration
/// revisits a set: from there on the sequence is periodic, so the requested
/// index is resolved by cycle arithmetic instead of more iterations.
pub(crate) fn indicator_mask(sys: &MetricSystem, n: u32) -> Vec<bool> {
    let mut seq: Vec<Vec<bool>> = Vec::new();
    let mut seen: std::collections::HashMap<Vec<bool>, usize> = std::collections::HashMap::new();
    let mut cur: Vec<bool> = {
        let mut m = vec![false; sys.state_count()];
        for s in sys.secret_indices() {
            m[s as usize] = true;
        }
        m
    };
    for step in 0..=n as usize {
        if let Some(&first) = seen.get(&cur) {
            let period = step - first;
            let idx = first + (n as usize - first) % period;
            return seq[idx].clone();
        }
        seen.insert(cur.clone(), step);
        seq.push(cur.clone());
        if step == n as usize {
            break;
        }
        cur = backward_step(sys, &cur);
    }
    seq[n as usize].clone()
}

/// `T_n`, the n-step certainty set: every length-n continuation from a
/// member ends in a secret state.
pub fn indicator(sys: &MetricSystem, n: u32) -> IndicatorSet {
    let mask = indicator_mask(sys, n);
    IndicatorSet {
        n,
        members: (0..sys.state_count() as u32)
            .filter(|&i| mask[i as usize])
            .map(|i| sys.state_id(i).to_string())
            .collect(),
    }
}

/// Decides δ-approximate K-step pre-opacity by scanning every reachable
/// estimator node for an estimate entirely inside `T_K`. The first
/// violating node in discovery order yields the shortest, lexicographically
/// least witness run.
pub fn verify_preopacity(sys: &MetricSystem, delta: f64, k: u32) -> Result<Verdict, VerifyError> {
    let observer = build_observer(sys, delta)?;
    Ok(verdict_from_observer(sys, &observer, k))
}

/// The same decision on a pre-built observer (avoids rebuilding when both
/// the verdict and the graph are wanted).
pub fn verdict_from_observer(sys: &MetricSystem, observer: &Observer, k: u32) -> Verdict {
    let t_k = indicator_mask(sys, k);
    let deadlocks = sys.validate().deadlocks();
    let mut verdict = Verdict {
        holds: true,
        delta: observer.delta(),
        k,
        observer_nodes: observer.node_count(),
        witness: None,
        deadlocks,
        method: None,
    };
    for idx in 0..observer.node_count() {
        let node = observer.node(idx);
        let violating = node.estimate.iter().all(|&x| t_k[x as usize]);
        if violating {
            verdict.holds = false;
            verdict.witness = Some(witness_steps(sys, observer, idx as u32));
            break;
        }
    }
    verdict
}

fn witness_steps(sys: &MetricSystem, observer: &Observer, node: u32) -> Vec<WitnessStep> {
    let run = observer.run_to(node, sys);
    // replay the run through the observer nodes along the parent chain
    let mut chain = Vec::new();
    let mut cur = node;
    loop {
        chain.push(cur);
        match observer.parent[cur as usize] {
            Some((p, _)) => cur = p,
            None => break,
        }
    }
    chain.reverse();
    chain
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let est = observer.node(n as usize);
            WitnessStep {
                state: run.states[i].clone(),
                input: if i == 0 {
                    None
                } else {
                    Some(run.inputs[i - 1].clone())
                },
                estimate: est.estimate_ids(sys),
            }
        })
        .collect()
}

/// Renders a violating verdict as a human-readable narrative: the run, the
/// estimate at each step, and the final inclusion in `T_K`.
pub fn extract_witness(
    sys: &MetricSystem,
    verdict: &Verdict,
) -> Result<String, VerifyError> {
    require_clean(sys)?;
    let steps = match (&verdict.witness, verdict.holds) {
        (Some(steps), false) => steps,
        _ => return Err(VerifyError::NoWitness),
    };
    let t_k = indicator(sys, verdict.k);
    let mut out = String::new();
    out.push_str(&format!(
        "revealing run at delta = {}, K = {} ({} estimator nodes searched)\n",
        verdict.delta, verdict.k, verdict.observer_nodes
    ));
    for (i, step) in steps.iter().enumerate() {
        let output = sys
            .index_of_state(&step.state)
            .map(|idx| sys.output(idx).to_string())
            .map_err(|_| VerifyError::UnknownState(step.state.clone()))?;
        match &step.input {
            None => out.push_str(&format!(
                "  step {i}: start in {} (output {output}), estimate {{{}}}\n",
                step.state,
                step.estimate.join(", ")
            )),
            Some(u) => out.push_str(&format!(
                "  step {i}: --{u}--> {} (output {output}), estimate {{{}}}\n",
                step.state,
                step.estimate.join(", ")
            )),
        }
    }
    let members: Vec<&str> = t_k.members.iter().map(|s| s.as_str()).collect();
    out.push_str(&format!(
        "  final estimate lies inside T_{} = {{{}}}: every continuation of length {} from here ends secret,\n",
        verdict.k,
        members.join(", "),
        verdict.k,
    ));
    out.push_str(
        "  so the intruder is already certain the system will be in a secret state in exactly that many steps.\n",
    );
    Ok(out)
}
