//! Finite metric transition systems.
//!
//! A system has finitely many states, each carrying an output point in
//! `R^m`, a set of initial states, a set of secret states, and labelled
//! transitions. Outputs are compared under the infinity norm, which is what
//! makes the system "metric": closeness of runs is closeness of their
//! output sequences, coordinate-wise.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// A point in the output space, compared under the infinity norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutputPoint(pub Vec<f64>);

impl OutputPoint {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Infinity-norm distance to another point of the same dimension.
    pub fn distance(&self, other: &OutputPoint) -> Result<f64, ModelError> {
        output_distance(self, other)
    }
}

impl fmt::Display for OutputPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// `max_i |y1_i - y2_i|`, the metric every δ and ε in this crate refers to.
pub fn output_distance(y1: &OutputPoint, y2: &OutputPoint) -> Result<f64, ModelError> {
    if y1.dim() != y2.dim() {
        return Err(ModelError::DimensionMismatch {
            left: y1.dim(),
            right: y2.dim(),
        });
    }
    Ok(y1
        .0
        .iter()
        .zip(&y2.0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// One state as declared in a system file. All fields are mandatory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDecl {
    pub id: String,
    pub output: OutputPoint,
    pub initial: bool,
    pub secret: bool,
}

/// One transition as declared in a system file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionDecl {
    pub from: String,
    pub input: String,
    pub to: String,
}

/// The on-disk shape of a system. Unknown fields are rejected so that a
/// typo in a hand-written file fails loudly instead of silently changing
/// the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub states: Vec<StateDecl>,
    pub inputs: Vec<String>,
    pub transitions: Vec<TransitionDecl>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid system file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown state '{0}'")]
    UnknownState(String),
    #[error("unknown input '{0}'")]
    UnknownInput(String),
    #[error("output dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// A structural problem that makes a system unusable for verification.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("no initial state is declared")]
    NoInitialState,
    #[error("state '{0}' is declared more than once")]
    DuplicateState(String),
    #[error("input '{0}' is declared more than once")]
    DuplicateInput(String),
    #[error("transition #{index} refers to undeclared state '{id}'")]
    UnknownStateInTransition { index: usize, id: String },
    #[error("transition #{index} refers to undeclared input '{id}'")]
    UnknownInputInTransition { index: usize, id: String },
    #[error("state '{state}' has output dimension {got}, expected {expected}")]
    OutputDimensionMismatch {
        state: String,
        got: usize,
        expected: usize,
    },
    #[error("state '{0}' has a non-finite output coordinate")]
    NonFiniteOutput(String),
}

/// A structural oddity that is legal but worth knowing about.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationWarning {
    /// No input is enabled at this state. Deadlocked runs end here, which
    /// makes "in exactly t more steps" claims about their continuations
    /// vacuous — see the verifier docs for why that matters.
    #[error("state '{0}' has no outgoing transition (deadlock)")]
    Deadlock(String),
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub errors: Vec<ValidationError>,
    pub warnings: Vec<ValidationWarning>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    /// Identifiers of deadlocked states, in declaration order.
    pub fn deadlocks(&self) -> Vec<String> {
        self.warnings
            .iter()
            .map(|ValidationWarning::Deadlock(s)| s.clone())
            .collect()
    }
}

/// A finite metric transition system, indexed for fast successor lookups.
///
/// Construction never fails: a structurally broken declaration is still
/// representable so that [`MetricSystem::validate`] can describe what is
/// wrong with it. Name-based operations error on undeclared identifiers;
/// the verification algorithms all require a validation-clean system.
#[derive(Debug, Clone)]
pub struct MetricSystem {
    decl: SystemFile,
    state_index: BTreeMap<String, u32>,
    input_index: BTreeMap<String, u32>,
    // adjacency[state][input] = sorted unique successor indices
    adjacency: Vec<Vec<Vec<u32>>>,
    // state indices sorted by identifier; the canonical traversal order
    by_name: Vec<u32>,
}

impl MetricSystem {
    pub fn new(decl: SystemFile) -> MetricSystem {
        let mut state_index = BTreeMap::new();
        for (i, s) in decl.states.iter().enumerate() {
            state_index.entry(s.id.clone()).or_insert(i as u32);
        }
        let mut input_index = BTreeMap::new();
        for (i, u) in decl.inputs.iter().enumerate() {
            input_index.entry(u.clone()).or_insert(i as u32);
        }
        let mut adjacency = vec![vec![Vec::new(); decl.inputs.len()]; decl.states.len()];
        for t in &decl.transitions {
            if let (Some(&f), Some(&u), Some(&to)) = (
                state_index.get(&t.from),
                input_index.get(&t.input),
                state_index.get(&t.to),
            ) {
                adjacency[f as usize][u as usize].push(to);
            }
        }
        for per_state in &mut adjacency {
            for succ in per_state {
                succ.sort_unstable();
                succ.dedup();
            }
        }
        let mut by_name: Vec<u32> = state_index.values().copied().collect();
        // BTreeMap iterates keys in order, so `by_name` is already sorted by
        // identifier; duplicates map to their first declaration.
        by_name.dedup();
        MetricSystem {
            decl,
            state_index,
            input_index,
            adjacency,
            by_name,
        }
    }

    pub fn from_json(text: &str) -> Result<MetricSystem, ModelError> {
        let decl: SystemFile = serde_json::from_str(text)?;
        Ok(MetricSystem::new(decl))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.decl).expect("system serializes");
        s.push('\n');
        s
    }

    /// Convenience constructor for tests and examples:
    /// `(id, output, initial, secret)` rows plus `(from, input, to)` rows.
    pub fn from_tables(
        states: &[(&str, &[f64], bool, bool)],
        inputs: &[&str],
        transitions: &[(&str, &str, &str)],
    ) -> MetricSystem {
        MetricSystem::new(SystemFile {
            states: states
                .iter()
                .map(|&(id, out, initial, secret)| StateDecl {
                    id: id.to_string(),
                    output: OutputPoint(out.to_vec()),
                    initial,
                    secret,
                })
                .collect(),
            inputs: inputs.iter().map(|u| u.to_string()).collect(),
            transitions: transitions
                .iter()
                .map(|&(f, u, t)| TransitionDecl {
                    from: f.to_string(),
                    input: u.to_string(),
                    to: t.to_string(),
                })
                .collect(),
        })
    }

    pub fn decl(&self) -> &SystemFile {
        &self.decl
    }

    pub fn state_count(&self) -> usize {
        self.decl.states.len()
    }

    pub fn input_count(&self) -> usize {
        self.decl.inputs.len()
    }

    pub fn transition_count(&self) -> usize {
        self.decl.transitions.len()
    }

    pub fn state_ids(&self) -> impl Iterator<Item = &str> {
        self.decl.states.iter().map(|s| s.id.as_str())
    }

    pub fn input_ids(&self) -> impl Iterator<Item = &str> {
        self.decl.inputs.iter().map(|u| u.as_str())
    }

    /// Checks every structural requirement and collects deadlock warnings.
    ///
    /// The file format itself already guarantees that secret and initial
    /// sets are subsets of the state set (they are per-state flags), so the
    /// errors reported here are the ones the format cannot rule out:
    /// duplicates, dangling transition endpoints, ragged or non-finite
    /// outputs, and an empty initial set.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut seen = BTreeSet::new();
        for s in &self.decl.states {
            if !seen.insert(&s.id) {
                report
                    .errors
                    .push(ValidationError::DuplicateState(s.id.clone()));
            }
        }
        let mut seen = BTreeSet::new();
        for u in &self.decl.inputs {
            if !seen.insert(u) {
                report
                    .errors
                    .push(ValidationError::DuplicateInput(u.clone()));
            }
        }
        if let Some(first) = self.decl.states.first() {
            let expected = first.output.dim();
            for s in &self.decl.states {
                if s.output.dim() != expected {
                    report.errors.push(ValidationError::OutputDimensionMismatch {
                        state: s.id.clone(),
                        got: s.output.dim(),
                        expected,
                    });
                }
                if s.output.0.iter().any(|v| !v.is_finite()) {
                    report
                        .errors
                        .push(ValidationError::NonFiniteOutput(s.id.clone()));
                }
            }
        }
        for (i, t) in self.decl.transitions.iter().enumerate() {
            for end in [&t.from, &t.to] {
                if !self.state_index.contains_key(end) {
                    report.errors.push(ValidationError::UnknownStateInTransition {
                        index: i,
                        id: end.clone(),
                    });
                }
            }
            if !self.input_index.contains_key(&t.input) {
                report.errors.push(ValidationError::UnknownInputInTransition {
                    index: i,
                    id: t.input.clone(),
                });
            }
        }
        if !self.decl.states.iter().any(|s| s.initial) {
            report.errors.push(ValidationError::NoInitialState);
        }
        for s in &self.decl.states {
            let idx = self.state_index[&s.id] as usize;
            if self.adjacency[idx].iter().all(|succ| succ.is_empty()) {
                report
                    .warnings
                    .push(ValidationWarning::Deadlock(s.id.clone()));
            }
        }
        report
    }

    /// Successor states of `x` under input `u`, sorted by identifier.
    pub fn successors(&self, x: &str, u: &str) -> Result<BTreeSet<String>, ModelError> {
        let xi = self.index_of_state(x)?;
        let ui = self.index_of_input(u)?;
        Ok(self.adjacency[xi as usize][ui as usize]
            .iter()
            .map(|&s| self.decl.states[s as usize].id.clone())
            .collect())
    }

    /// Inputs with at least one transition out of `x`, sorted.
    pub fn enabled_inputs(&self, x: &str) -> Result<BTreeSet<String>, ModelError> {
        let xi = self.index_of_state(x)?;
        Ok(self
            .input_index
            .iter()
            .filter(|(_, &ui)| !self.adjacency[xi as usize][ui as usize].is_empty())
            .map(|(u, _)| u.clone())
            .collect())
    }

    // ---- index-level accessors used throughout the crate ----

    pub(crate) fn index_of_state(&self, id: &str) -> Result<u32, ModelError> {
        self.state_index
            .get(id)
            .copied()
            .ok_or_else(|| ModelError::UnknownState(id.to_string()))
    }

    pub(crate) fn index_of_input(&self, id: &str) -> Result<u32, ModelError> {
        self.input_index
            .get(id)
            .copied()
            .ok_or_else(|| ModelError::UnknownInput(id.to_string()))
    }

    pub(crate) fn state_id(&self, i: u32) -> &str {
        &self.decl.states[i as usize].id
    }

    pub(crate) fn input_id(&self, i: u32) -> &str {
        &self.decl.inputs[i as usize]
    }

    pub(crate) fn output(&self, i: u32) -> &OutputPoint {
        &self.decl.states[i as usize].output
    }

    pub(crate) fn is_secret(&self, i: u32) -> bool {
        self.decl.states[i as usize].secret
    }

    pub(crate) fn is_initial(&self, i: u32) -> bool {
        self.decl.states[i as usize].initial
    }

    /// State indices sorted by identifier — the canonical traversal order
    /// that makes observers, witnesses and DOT output deterministic.
    pub(crate) fn states_by_name(&self) -> &[u32] {
        &self.by_name
    }

    /// Input indices sorted by identifier.
    pub(crate) fn inputs_by_name(&self) -> Vec<u32> {
        self.input_index.values().copied().collect()
    }

    pub(crate) fn successor_indices(&self, x: u32, u: u32) -> &[u32] {
        &self.adjacency[x as usize][u as usize]
    }

    /// Sorted unique successors of `x` under *any* input.
    pub(crate) fn all_successor_indices(&self, x: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self.adjacency[x as usize]
            .iter()
            .flatten()
            .copied()
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub(crate) fn initial_indices(&self) -> Vec<u32> {
        (0..self.state_count() as u32)
            .filter(|&i| self.is_initial(i))
            .collect()
    }

    pub(crate) fn secret_indices(&self) -> Vec<u32> {
        (0..self.state_count() as u32)
            .filter(|&i| self.is_secret(i))
            .collect()
    }

    /// `max_i |H(a)_i - H(b)_i|` on state indices; panics on ragged outputs,
    /// which validation rules out.
    pub(crate) fn output_distance_idx(&self, a: u32, b: u32) -> f64 {
        output_distance(self.output(a), self.output(b)).expect("outputs have equal dimension")
    }

    /// Sorted identifiers for a set of state indices.
    pub(crate) fn ids_of(&self, indices: &[u32]) -> Vec<String> {
        let mut out: Vec<String> = indices
            .iter()
            .map(|&i| self.state_id(i).to_string())
            .collect();
        out.sort();
        out
    }
}
