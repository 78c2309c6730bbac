//! Finite abstractions of contractive discrete-time control systems.
//!
//! Given dynamics `x⁺ = f(x, u)` on a box-union state set with an
//! incremental-stability certificate (β, γ) and an output lower bound α,
//! a grid of spacing η over the state set and μ over the input set yields
//! a finite metric system whose pre-opacity verdict transfers back to the
//! concrete system — provided two inequalities tie the grid resolution to
//! the certificate:
//!
//! ```text
//! β(α⁻¹(ε), 1) + γ(μ) + η ≤ α⁻¹(ε)      ("contraction")
//! β(α⁻¹(ε), 1) + η       ≤ θ            ("inflation")
//! ```
//!
//! θ inflates the secret set before marking grid states secret, so every
//! concrete secret state has all its nearby grid states secret too.

use crate::boxes::{BoxError, BoxUnion};
use crate::dsl::{parse_expression, ComparisonError, ComparisonFunction, EvalError, Expression, ParseError};
use crate::model::{MetricSystem, OutputPoint, StateDecl, SystemFile, TransitionDecl};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AbstractionError {
    #[error("control system file is invalid: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("control system spec is invalid: {0}")]
    InvalidSpec(String),
    #[error("{field}[{index}] does not parse: {source}")]
    InvalidExpression {
        field: &'static str,
        index: usize,
        source: ParseError,
    },
    #[error(transparent)]
    Comparison(#[from] ComparisonError),
    #[error(transparent)]
    Box(#[from] BoxError),
    #[error("invalid quantization parameters: {0}")]
    InvalidParams(String),
    #[error("quantization conditions fail: {}", .report.failure_summary())]
    QuantizationFailed { report: QuantizationReport },
    #[error("dynamics evaluation failed at state {state} under input {input}: {source}")]
    Evaluation {
        state: String,
        input: String,
        source: EvalError,
    },
    #[error("point {point:?} lies outside the declared {set} set")]
    OutsideDomain { set: &'static str, point: Vec<f64> },
}

/// A contractive control system: dynamics, output map, state/secret/input
/// geometry, and its (α, β, γ) certificate.
#[derive(Debug, Clone)]
pub struct ControlSystemSpec {
    pub state_dim: usize,
    pub input_dim: usize,
    pub state_set: BoxUnion,
    pub secret_set: BoxUnion,
    pub input_set: BoxUnion,
    pub dynamics: Vec<Expression>,
    pub output: Vec<Expression>,
    pub alpha: ComparisonFunction,
    pub beta: ComparisonFunction,
    pub gamma: ComparisonFunction,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    state_dim: usize,
    input_dim: usize,
    state_set: BoxUnion,
    secret_set: BoxUnion,
    input_set: BoxUnion,
    dynamics: Vec<String>,
    output: Vec<String>,
    alpha: ComparisonFunction,
    beta: ComparisonFunction,
    gamma: ComparisonFunction,
}

impl ControlSystemSpec {
    pub fn from_json(text: &str) -> Result<ControlSystemSpec, AbstractionError> {
        let file: SpecFile = serde_json::from_str(text)?;
        ControlSystemSpec::from_file(file)
    }

    fn from_file(file: SpecFile) -> Result<ControlSystemSpec, AbstractionError> {
        let bad = |msg: String| AbstractionError::InvalidSpec(msg);
        if file.state_dim == 0 {
            return Err(bad("state_dim must be at least 1".into()));
        }
        if file.input_dim == 0 {
            return Err(bad("input_dim must be at least 1".into()));
        }
        for (name, set, dim) in [
            ("state_set", &file.state_set, file.state_dim),
            ("secret_set", &file.secret_set, file.state_dim),
            ("input_set", &file.input_set, file.input_dim),
        ] {
            set.validate()?;
            if set.is_empty() {
                return Err(bad(format!("{name} must not be empty")));
            }
            if set.dim() != Some(dim) {
                return Err(bad(format!(
                    "{name} has dimension {:?}, expected {dim}",
                    set.dim()
                )));
            }
        }
        if !file.secret_set.is_subset_of(&file.state_set) {
            return Err(bad("secret_set must be contained in state_set".into()));
        }
        if file.dynamics.len() != file.state_dim {
            return Err(bad(format!(
                "dynamics must list {} expression(s), got {}",
                file.state_dim,
                file.dynamics.len()
            )));
        }
        if file.output.is_empty() {
            return Err(bad("output must list at least one expression".into()));
        }
        let parse_all = |field: &'static str, texts: &[String]| {
            texts
                .iter()
                .enumerate()
                .map(|(index, t)| {
                    parse_expression(t, file.state_dim, file.input_dim).map_err(|source| {
                        AbstractionError::InvalidExpression {
                            field,
                            index,
                            source,
                        }
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        };
        let dynamics = parse_all("dynamics", &file.dynamics)?;
        let output = parse_all("output", &file.output)?;
        for (i, e) in output.iter().enumerate() {
            if e.references_input() {
                return Err(bad(format!(
                    "output[{i}] references an input variable; the output map is a function of state only"
                )));
            }
        }
        for (role, f, want_kinf) in [
            ("alpha", &file.alpha, true),
            ("beta", &file.beta, false),
            ("gamma", &file.gamma, true),
        ] {
            f.validate()?;
            if f.is_kinf() != want_kinf {
                let expected = if want_kinf {
                    "a class-K∞ kind (linear or power)"
                } else {
                    "a class-KL kind (kl-exp-linear)"
                };
                return Err(bad(format!("{role} must be {expected}, got '{}'", f.kind_name())));
            }
        }
        Ok(ControlSystemSpec {
            state_dim: file.state_dim,
            input_dim: file.input_dim,
            state_set: file.state_set,
            secret_set: file.secret_set,
            input_set: file.input_set,
            dynamics,
            output,
            alpha: file.alpha,
            beta: file.beta,
            gamma: file.gamma,
        })
    }

    fn apply(&self, exprs: &[Expression], x: &[f64], u: &[f64]) -> Result<Vec<f64>, EvalError> {
        exprs.iter().map(|e| e.evaluate(x, u)).collect()
    }

    /// `f(x, u)`.
    pub fn step(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.apply(&self.dynamics, x, u)
    }

    /// `h(x)`.
    pub fn output_at(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let dummy = vec![0.0; self.input_dim];
        self.apply(&self.output, x, &dummy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizationParams {
    pub eta: f64,
    pub mu: f64,
    pub theta: f64,
}

impl QuantizationParams {
    fn validate(&self) -> Result<(), AbstractionError> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(AbstractionError::InvalidParams(format!(
                "eta must be positive and finite, got {}",
                self.eta
            )));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(AbstractionError::InvalidParams(format!(
                "mu must be non-negative and finite, got {}",
                self.mu
            )));
        }
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return Err(AbstractionError::InvalidParams(format!(
                "theta must be non-negative and finite, got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

/// One named inequality, with both sides evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizationCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizationReport {
    pub epsilon: f64,
    pub alpha_inverse: f64,
    pub checks: Vec<QuantizationCheck>,
}

impl QuantizationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&QuantizationCheck> {
        self.checks.iter().find(|c| !c.pass)
    }

    pub fn failure_summary(&self) -> String {
        match self.first_failure() {
            Some(c) => format!("'{}' requires {} <= {}", c.name, c.lhs, c.rhs),
            None => "all checks pass".to_string(),
        }
    }

    /// The human-readable rendering written next to generated artifacts.
    pub fn render(&self) -> String {
        let mut out = format!(
            "quantization checks at epsilon = {} (alpha_inverse = {:.6}):\n",
            self.epsilon, self.alpha_inverse
        );
        for c in &self.checks {
            let verdict = if c.pass { "pass" } else { "FAIL" };
            let relation = match c.name {
                "contraction" => "beta(alpha_inv, 1) + gamma(mu) + eta <= alpha_inv",
                "inflation" => "beta(alpha_inv, 1) + eta <= theta",
                "eta-span" => "eta <= min(span(secret), span(state \\ secret))",
                "mu-span" => "mu <= span(input), grid feasible",
                _ => "",
            };
            out.push_str(&format!(
                "  {:<12} {:.6} <= {:.6}   [{verdict}]   {relation}\n",
                format!("{}:", c.name),
                c.lhs,
                c.rhs
            ));
        }
        out
    }
}

/// Evaluates the two certificate inequalities and the span constraints on
/// the grid parameters. All four must pass for a sound abstraction.
pub fn check_quantization(
    spec: &ControlSystemSpec,
    params: &QuantizationParams,
    epsilon: f64,
) -> Result<QuantizationReport, AbstractionError> {
    params.validate()?;
    let a_inv = spec.alpha.alpha_inverse(epsilon)?;
    let beta_1 = spec.beta.eval_beta(a_inv, 1)?;
    let gamma_mu = spec.gamma.eval_kinf(params.mu)?;

    let mut checks = Vec::new();
    checks.push(QuantizationCheck {
        name: "contraction",
        lhs: beta_1 + gamma_mu + params.eta,
        rhs: a_inv,
        pass: beta_1 + gamma_mu + params.eta <= a_inv,
    });
    checks.push(QuantizationCheck {
        name: "inflation",
        lhs: beta_1 + params.eta,
        rhs: params.theta,
        pass: beta_1 + params.eta <= params.theta,
    });

    let span_secret = spec.secret_set.span().unwrap_or(0.0);
    let span_rest = spec
        .state_set
        .difference(&spec.secret_set)
        .span()
        .unwrap_or(0.0);
    let rhs = span_secret.min(span_rest);
    checks.push(QuantizationCheck {
        name: "eta-span",
        lhs: params.eta,
        rhs,
        pass: params.eta <= rhs,
    });

    let span_input = spec.input_set.span()?;
    let mu_ok = params.mu <= span_input
        && (params.mu > 0.0 || spec.input_set.is_finite_point_set());
    checks.push(QuantizationCheck {
        name: "mu-span",
        lhs: params.mu,
        rhs: span_input,
        pass: mu_ok,
    });

    Ok(QuantizationReport {
        epsilon,
        alpha_inverse: a_inv,
        checks,
    })
}

/// How grid states are marked secret.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SecretMode {
    /// Secret iff the state's η-cell `[x_q, x_q + η)` intersects the
    /// θ-inflated secret set (the default; errs on the inclusive side).
    Cell,
    /// Secret iff the grid point itself lies in the inflated set.
    Point,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeRecord {
    pub state: String,
    pub input: String,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildReport {
    pub quantization: QuantizationReport,
    pub secret_mode: SecretMode,
    pub eta: f64,
    pub mu: f64,
    pub theta: f64,
    pub states: usize,
    pub inputs: usize,
    pub transitions: usize,
    pub secret_states: Vec<String>,
    /// What the other marking mode would have chosen, so the difference is
    /// visible without rebuilding.
    pub secret_states_other_mode: Vec<String>,
    /// Grid/input combinations whose image under `f` leaves the state set.
    pub escapes: Vec<EscapeRecord>,
}

impl BuildReport {
    pub fn render(&self) -> String {
        let mut out = self.quantization.render();
        out.push_str(&format!(
            "abstraction: {} states, {} input(s), {} transitions (eta = {}, mu = {}, theta = {})\n",
            self.states, self.inputs, self.transitions, self.eta, self.mu, self.theta
        ));
        let mode = match self.secret_mode {
            SecretMode::Cell => ("cell", "point"),
            SecretMode::Point => ("point", "cell"),
        };
        out.push_str(&format!(
            "secret states ({} mode): {}\n",
            mode.0,
            self.secret_states.join(", ")
        ));
        out.push_str(&format!(
            "  ({} mode would give: {})\n",
            mode.1,
            self.secret_states_other_mode.join(", ")
        ));
        if !self.escapes.is_empty() {
            out.push_str(&format!(
                "warning: {} state/input pairs map outside the state set\n",
                self.escapes.len()
            ));
        }
        out
    }
}

#[derive(Debug)]
pub struct Abstraction {
    pub system: MetricSystem,
    pub report: BuildReport,
}

fn fmt_coord(v: f64) -> String {
    format!("{v}")
}

fn format_point(coords: &[f64]) -> String {
    if coords.len() == 1 {
        fmt_coord(coords[0])
    } else {
        let inner: Vec<String> = coords.iter().map(|&v| fmt_coord(v)).collect();
        format!("({})", inner.join(","))
    }
}

fn round9(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

// [c, c+eta) per axis against an interval (degenerate = single point)
fn cell_overlaps_axis(lo: f64, hi: f64, c: f64, eta: f64) -> bool {
    if lo == hi {
        c <= lo && lo < c + eta
    } else {
        lo.max(c) < hi.min(c + eta)
    }
}

fn cell_intersects(set: &BoxUnion, coords: &[f64], eta: f64) -> bool {
    set.boxes.iter().any(|bx| {
        bx.len() == coords.len()
            && bx
                .iter()
                .zip(coords)
                .all(|(&[lo, hi], &c)| cell_overlaps_axis(lo, hi, c, eta))
    })
}

/// Builds the finite abstraction after verifying the quantization
/// conditions; fails with the full report if any check fails.
pub fn build_abstraction(
    spec: &ControlSystemSpec,
    params: &QuantizationParams,
    epsilon: f64,
    mode: SecretMode,
) -> Result<Abstraction, AbstractionError> {
    let report = check_quantization(spec, params, epsilon)?;
    if !report.passed() {
        return Err(AbstractionError::QuantizationFailed { report });
    }
    build_abstraction_unchecked(spec, params, epsilon, mode)
}

/// The same construction with the inequality gate skipped (the span and
/// positivity requirements that make the construction well-defined are
/// still enforced). Verdicts on the result carry no transfer guarantee.
pub fn build_abstraction_unchecked(
    spec: &ControlSystemSpec,
    params: &QuantizationParams,
    epsilon: f64,
    mode: SecretMode,
) -> Result<Abstraction, AbstractionError> {
    params.validate()?;
    let quantization = check_quantization(spec, params, epsilon)?;
    let eta = params.eta;

    let state_keys = spec.state_set.grid(eta)?;
    if state_keys.is_empty() {
        return Err(AbstractionError::InvalidParams(
            "state grid is empty; shift or refine eta".into(),
        ));
    }
    let state_coords: Vec<Vec<f64>> = state_keys
        .iter()
        .map(|k| k.iter().map(|&ki| ki as f64 * eta).collect())
        .collect();
    let state_names: Vec<String> = state_coords.iter().map(|c| format_point(c)).collect();
    let key_index: HashMap<&Vec<i64>, usize> =
        state_keys.iter().enumerate().map(|(i, k)| (k, i)).collect();

    let input_coords: Vec<Vec<f64>> = if params.mu == 0.0 {
        if !spec.input_set.is_finite_point_set() {
            return Err(AbstractionError::InvalidParams(
                "mu = 0 requires the input set to be a finite set of points".into(),
            ));
        }
        spec.input_set.point_list()
    } else {
        spec.input_set
            .grid(params.mu)?
            .iter()
            .map(|k| k.iter().map(|&ki| ki as f64 * params.mu).collect())
            .collect()
    };
    if input_coords.is_empty() {
        return Err(AbstractionError::InvalidParams(
            "input grid is empty; shift or refine mu".into(),
        ));
    }
    let input_names: Vec<String> = input_coords.iter().map(|c| format_point(c)).collect();

    let inflated = spec.secret_set.inflate(params.theta, &spec.state_set);
    let secret_cell: Vec<bool> = state_coords
        .iter()
        .map(|c| cell_intersects(&inflated, c, eta))
        .collect();
    let secret_point: Vec<bool> = state_coords.iter().map(|c| inflated.contains(c)).collect();
    let (active, other) = match mode {
        SecretMode::Cell => (&secret_cell, &secret_point),
        SecretMode::Point => (&secret_point, &secret_cell),
    };

    let mut transitions = Vec::new();
    let mut escapes = Vec::new();
    for (si, x) in state_coords.iter().enumerate() {
        for (ui, u) in input_coords.iter().enumerate() {
            let target = spec
                .step(x, u)
                .map_err(|source| AbstractionError::Evaluation {
                    state: state_names[si].clone(),
                    input: input_names[ui].clone(),
                    source,
                })?;
            if !spec.state_set.contains(&target) {
                escapes.push(EscapeRecord {
                    state: state_names[si].clone(),
                    input: input_names[ui].clone(),
                    target: target.clone(),
                });
            }
            // all grid states within eta of the image, in the infinity norm:
            // enumerate candidate indices per axis, then filter exactly
            let mut candidates: Vec<Vec<i64>> = vec![Vec::new()];
            for &t in &target {
                let k_lo = ((t - eta) / eta).floor() as i64 - 1;
                let k_hi = ((t + eta) / eta).ceil() as i64 + 1;
                let axis: Vec<i64> = (k_lo..=k_hi)
                    .filter(|&k| (k as f64 * eta - t).abs() <= eta)
                    .collect();
                let mut next = Vec::with_capacity(candidates.len() * axis.len());
                for prefix in &candidates {
                    for &k in &axis {
                        let mut p = prefix.clone();
                        p.push(k);
                        next.push(p);
                    }
                }
                candidates = next;
            }
            for key in candidates {
                if let Some(&ti) = key_index.get(&key) {
                    // exact infinity-norm filter (axis filter is per-axis,
                    // which in the ∞ norm is already exact)
                    transitions.push(TransitionDecl {
                        from: state_names[si].clone(),
                        input: input_names[ui].clone(),
                        to: state_names[ti].clone(),
                    });
                }
            }
        }
    }

    let mut states = Vec::with_capacity(state_coords.len());
    for (i, coords) in state_coords.iter().enumerate() {
        let y = spec
            .output_at(coords)
            .map_err(|source| AbstractionError::Evaluation {
                state: state_names[i].clone(),
                input: "-".to_string(),
                source,
            })?;
        // canonicalize to 9 decimals: well below every modelling tolerance,
        // far above f64 noise — keeps symmetric outputs (e.g. |cos|) in one
        // equality class under delta = 0
        let y: Vec<f64> = y.into_iter().map(round9).collect();
        states.push(StateDecl {
            id: state_names[i].clone(),
            output: OutputPoint(y),
            initial: true,
            secret: active[i],
        });
    }

    let system = MetricSystem::new(SystemFile {
        states,
        inputs: input_names.clone(),
        transitions,
    });

    let name_of = |flags: &[bool]| -> Vec<String> {
        flags
            .iter()
            .enumerate()
            .filter(|&(_, &s)| s)
            .map(|(i, _)| state_names[i].clone())
            .collect()
    };

    let report = BuildReport {
        quantization,
        secret_mode: mode,
        eta: params.eta,
        mu: params.mu,
        theta: params.theta,
        states: system.state_count(),
        inputs: system.input_count(),
        transitions: system.transition_count(),
        secret_states: name_of(active),
        secret_states_other_mode: name_of(other),
        escapes,
    };
    Ok(Abstraction { system, report })
}

/// A concrete trajectory; `left_domain` lists the indices of states that
/// fell outside the declared state set (the simulation continues anyway).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub left_domain: Vec<usize>,
}

/// Iterates the dynamics from `x0` under the given input sequence. The
/// start state must lie in the state set and every input in the input set.
pub fn simulate(
    spec: &ControlSystemSpec,
    x0: &[f64],
    inputs: &[Vec<f64>],
) -> Result<Trajectory, AbstractionError> {
    if !spec.state_set.contains(x0) {
        return Err(AbstractionError::OutsideDomain {
            set: "state",
            point: x0.to_vec(),
        });
    }
    for u in inputs {
        if !spec.input_set.contains(u) {
            return Err(AbstractionError::OutsideDomain {
                set: "input",
                point: u.clone(),
            });
        }
    }
    let mut states = vec![x0.to_vec()];
    let mut left_domain = Vec::new();
    for (i, u) in inputs.iter().enumerate() {
        let next = spec
            .step(states.last().unwrap(), u)
            .map_err(|source| AbstractionError::Evaluation {
                state: format_point(states.last().unwrap()),
                input: format_point(u),
                source,
            })?;
        if !spec.state_set.contains(&next) {
            left_domain.push(i + 1);
        }
        states.push(next);
    }
    Ok(Trajectory { states, left_domain })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IssViolation {
    pub sample: usize,
    pub step: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IssReport {
    pub samples: usize,
    pub horizon: usize,
    pub comparisons: usize,
    pub violations: Vec<IssViolation>,
}

fn inf_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Randomized falsification of the declared incremental-stability bound:
/// sample trajectory pairs and check
/// `‖ξ(k) − ξ'(k)‖ ≤ β(‖x0 − x0'‖, k) + γ(sup_j ‖υ(j) − υ'(j)‖)` at every
/// step. Comparisons carry a 1e-9 absolute slack because the bound is tight
/// (an equality) at k = 0 for the linear examples.
pub fn check_delta_iss_empirical(
    spec: &ControlSystemSpec,
    samples: usize,
    horizon: usize,
    seed: u64,
) -> Result<IssReport, AbstractionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let mut comparisons = 0;
    for sample in 0..samples {
        let x0 = spec.state_set.sample(&mut rng);
        let y0 = spec.state_set.sample(&mut rng);
        let us: Vec<Vec<f64>> = (0..horizon).map(|_| spec.input_set.sample(&mut rng)).collect();
        let vs: Vec<Vec<f64>> = (0..horizon).map(|_| spec.input_set.sample(&mut rng)).collect();
        let tx = simulate(spec, &x0, &us)?;
        let ty = simulate(spec, &y0, &vs)?;
        let d0 = inf_norm_diff(&x0, &y0);
        let du = us
            .iter()
            .zip(&vs)
            .map(|(a, b)| inf_norm_diff(a, b))
            .fold(0.0, f64::max);
        let gamma_du = spec.gamma.eval_kinf(du)?;
        for k in 0..=horizon {
            let lhs = inf_norm_diff(&tx.states[k], &ty.states[k]);
            let rhs = spec.beta.eval_beta(d0, k as u32)? + gamma_du;
            comparisons += 1;
            if lhs > rhs + 1e-9 {
                violations.push(IssViolation {
                    sample,
                    step: k,
                    lhs,
                    rhs,
                });
            }
        }
    }
    Ok(IssReport {
        samples,
        horizon,
        comparisons,
        violations,
    })
}
