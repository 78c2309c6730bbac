//! Command-line interface. Thin by design: every subcommand is a direct
//! composition of library calls, so anything scriptable here is equally
//! available programmatically.
//!
//! Exit codes: 0 — success (property holds / relation exists / no
//! violations); 1 — clean negative answer (violated / unrelated);
//! 2 — any error (unreadable input, failed validation, failed
//! quantization checks, bad flags).

use crate::abstraction::{
    build_abstraction, build_abstraction_unchecked, AbstractionError, ControlSystemSpec,
    QuantizationParams, SecretMode,
};
use crate::dot::{observer_dot, system_dot};
use crate::estimator::build_observer;
use crate::model::MetricSystem;
use crate::oracle::{oracle_verify_with_budget, OracleQuery, DEFAULT_NODE_BUDGET, ORACLE_BUDGET_ENV};
use crate::pipeline::{run_pipeline, PipelineConfig, PipelineStatus};
use crate::relation::{check_relation, max_akp_relation, RelationPairs};
use crate::verify::{extract_witness, verdict_from_observer, Verdict};
use clap::{Parser, Subcommand, ValueEnum};
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "preopacity",
    version,
    about = "Verify approximate K-step pre-opacity of finite metric systems,\n\
             relate systems by property-preserving simulations, and abstract\n\
             contractive control systems into verifiable finite models."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Estimator-graph decision procedure (complete, terminating).
    Observer,
    /// Bounded-horizon run enumeration straight from the definition.
    Oracle,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SecretModeArg {
    Cell,
    Point,
}

impl From<SecretModeArg> for SecretMode {
    fn from(m: SecretModeArg) -> SecretMode {
        match m {
            SecretModeArg::Cell => SecretMode::Cell,
            SecretModeArg::Point => SecretMode::Point,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExportFormat {
    Dot,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide delta-approximate K-step pre-opacity of a system file.
    Verify {
        /// System description (JSON).
        system: PathBuf,
        /// Measurement precision available to the intruder.
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        /// Number of steps ahead of the reveal the secret must stay hidden.
        #[arg(long, default_value_t = 0)]
        k: u32,
        /// On violation, print the witness run as a narrative.
        #[arg(long)]
        witness: bool,
        /// Decision procedure to use.
        #[arg(long, value_enum, default_value_t = Method::Observer)]
        method: Method,
        /// Run-prefix length bound (required for --method oracle).
        #[arg(long)]
        horizon: Option<usize>,
        /// Print the verdict as JSON instead of a summary line.
        #[arg(long)]
        json: bool,
    },
    /// Discretize a control system into a finite abstraction.
    Abstract {
        /// Control-system description (JSON).
        spec: PathBuf,
        /// State grid spacing.
        #[arg(long)]
        eta: f64,
        /// Input grid spacing (0 = use the declared finite input points).
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        /// Secret-set inflation radius.
        #[arg(long)]
        theta: f64,
        /// Output-distance budget of the abstraction.
        #[arg(long)]
        epsilon: f64,
        #[arg(long, value_enum, default_value_t = SecretModeArg::Cell)]
        secret_mode: SecretModeArg,
        /// Build even if the quantization checks fail (no guarantee then).
        #[arg(long = "unsafe")]
        unchecked: bool,
        /// Write the abstract system JSON here.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Compute or check a property-preserving simulation relation.
    Relate {
        left: PathBuf,
        right: PathBuf,
        /// Output-distance slack of the relation.
        #[arg(long)]
        epsilon: f64,
        /// Check this relation file instead of computing the greatest one.
        #[arg(long)]
        check: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Abstract, verify, and transfer the verdict in one run.
    Pipeline {
        /// Control-system description (JSON).
        spec: PathBuf,
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        epsilon: f64,
        /// Precision at which the abstraction is verified.
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        k: u32,
        #[arg(long, value_enum, default_value_t = SecretModeArg::Cell)]
        secret_mode: SecretModeArg,
        /// Directory for artifacts (system JSON, DOT graphs, reports).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a system (or its estimator graph) for Graphviz.
    Export {
        system: PathBuf,
        #[arg(long, value_enum, default_value_t = ExportFormat::Dot)]
        format: ExportFormat,
        /// Render the estimator graph instead of the system itself.
        #[arg(long)]
        observer: bool,
        /// Precision for the estimator graph (with --observer).
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        /// Output file (stdout if omitted).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

struct CliError(String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> CliError {
        CliError(e.to_string())
    }
}

fn read_system(path: &Path) -> Result<MetricSystem, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError(format!("cannot read {}: {e}", path.display())))?;
    let sys = MetricSystem::from_json(&text)?;
    let report = sys.validate();
    if !report.is_clean() {
        let lines: Vec<String> = report.errors.iter().map(|e| e.to_string()).collect();
        return Err(CliError(format!(
            "{} fails validation:\n  {}",
            path.display(),
            lines.join("\n  ")
        )));
    }
    Ok(sys)
}

fn read_spec(path: &Path) -> Result<ControlSystemSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError(format!("cannot read {}: {e}", path.display())))?;
    Ok(ControlSystemSpec::from_json(&text)?)
}

fn write_or_print(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn oracle_budget() -> Result<usize, CliError> {
    match std::env::var(ORACLE_BUDGET_ENV) {
        Ok(v) => v.parse::<usize>().map_err(|_| {
            CliError(format!(
                "{ORACLE_BUDGET_ENV} must be a non-negative integer, got {v:?}"
            ))
        }),
        Err(_) => Ok(DEFAULT_NODE_BUDGET),
    }
}

fn print_verdict(sys: &MetricSystem, verdict: &Verdict, json: bool, witness: bool) -> i32 {
    if json {
        print!("{}", verdict.to_json());
    } else {
        println!(
            "verdict: {} at delta = {}, K = {} ({} nodes explored)",
            if verdict.holds { "HOLDS" } else { "VIOLATED" },
            verdict.delta,
            verdict.k,
            verdict.observer_nodes
        );
        if !verdict.deadlocks.is_empty() {
            println!(
                "note: deadlocked states present ({}); certainty about the future is \
                 counted vacuously there",
                verdict.deadlocks.join(", ")
            );
        }
    }
    if witness && !verdict.holds {
        match extract_witness(sys, verdict) {
            Ok(text) => println!("{text}"),
            Err(e) => eprintln!("cannot render witness: {e}"),
        }
    }
    if verdict.holds {
        0
    } else {
        1
    }
}

fn cmd_verify(
    system: &Path,
    delta: f64,
    k: u32,
    witness: bool,
    method: Method,
    horizon: Option<usize>,
    json: bool,
) -> Result<i32, CliError> {
    let sys = read_system(system)?;
    let verdict = match method {
        Method::Observer => {
            let observer = build_observer(&sys, delta)?;
            verdict_from_observer(&sys, &observer, k)
        }
        Method::Oracle => {
            let horizon = horizon.ok_or_else(|| {
                CliError("--method oracle requires --horizon".to_string())
            })?;
            let query = OracleQuery::new(delta, k, horizon)?;
            oracle_verify_with_budget(&sys, &query, oracle_budget()?)?
        }
    };
    Ok(print_verdict(&sys, &verdict, json, witness))
}

#[allow(clippy::too_many_arguments)]
fn cmd_abstract(
    spec: &Path,
    eta: f64,
    mu: f64,
    theta: f64,
    epsilon: f64,
    mode: SecretMode,
    unchecked: bool,
    out: &Option<PathBuf>,
) -> Result<i32, CliError> {
    let spec = read_spec(spec)?;
    let params = QuantizationParams { eta, mu, theta };
    let abstraction = if unchecked {
        build_abstraction_unchecked(&spec, &params, epsilon, mode)?
    } else {
        match build_abstraction(&spec, &params, epsilon, mode) {
            Ok(a) => a,
            Err(AbstractionError::QuantizationFailed { report }) => {
                eprint!("{}", report.render());
                return Err(CliError(format!(
                    "quantization conditions fail: {}",
                    report.failure_summary()
                )));
            }
            Err(e) => return Err(e.into()),
        }
    };
    print!("{}", abstraction.report.render());
    if let Some(path) = out {
        std::fs::write(path, abstraction.system.to_json())
            .map_err(|e| CliError(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn cmd_relate(
    left: &Path,
    right: &Path,
    epsilon: f64,
    check: &Option<PathBuf>,
    json: bool,
) -> Result<i32, CliError> {
    let a = read_system(left)?;
    let b = read_system(right)?;
    match check {
        Some(pairs_path) => {
            let text = std::fs::read_to_string(pairs_path)
                .map_err(|e| CliError(format!("cannot read {}: {e}", pairs_path.display())))?;
            let pairs = RelationPairs::from_json(&text)?;
            let violations = check_relation(&a, &b, epsilon, &pairs)?;
            if json {
                let mut s = serde_json::to_string_pretty(&violations).expect("serializes");
                s.push('\n');
                print!("{s}");
            } else {
                for v in &violations {
                    println!("{v}");
                }
                println!(
                    "{} violation(s) in a relation of {} pair(s) at epsilon = {epsilon}",
                    violations.len(),
                    pairs.len()
                );
            }
            Ok(if violations.is_empty() { 0 } else { 1 })
        }
        None => {
            let result = max_akp_relation(&a, &b, epsilon)?;
            if json {
                let mut s = serde_json::to_string_pretty(&result).expect("serializes");
                s.push('\n');
                print!("{s}");
            } else if result.related {
                println!(
                    "related at epsilon = {}: greatest relation has {} pair(s)",
                    result.epsilon,
                    result.relation.len()
                );
                println!("a verdict at delta on the right transfers to delta + {} on the left", 2.0 * result.epsilon);
            } else {
                let failure = result.failure.as_ref().expect("failure recorded");
                println!(
                    "not related at epsilon = {}: condition {} fails at state {}",
                    result.epsilon, failure.condition, failure.state
                );
            }
            Ok(if result.related { 0 } else { 1 })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_pipeline(
    spec: &Path,
    eta: f64,
    mu: f64,
    theta: f64,
    epsilon: f64,
    delta: f64,
    k: u32,
    mode: SecretMode,
    out: &Option<PathBuf>,
) -> Result<i32, CliError> {
    let spec = read_spec(spec)?;
    let cfg = PipelineConfig {
        params: QuantizationParams { eta, mu, theta },
        epsilon,
        delta,
        k,
        mode,
    };
    let result = run_pipeline(&spec, &cfg)?;
    print!("{}", result.report.render());
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError(format!("cannot create {}: {e}", dir.display())))?;
        let write = |name: &str, content: &str| -> Result<(), CliError> {
            let path = dir.join(name);
            std::fs::write(&path, content)
                .map_err(|e| CliError(format!("cannot write {}: {e}", path.display())))
        };
        write("abstraction.json", &result.abstraction.system.to_json())?;
        write("report.json", &result.report.to_json())?;
        write("system.dot", &system_dot(&result.abstraction.system))?;
        write(
            "observer.dot",
            &observer_dot(&result.abstraction.system, &result.observer),
        )?;
        println!("wrote artifacts to {}", dir.display());
    }
    Ok(match result.report.status {
        PipelineStatus::Guaranteed => 0,
        PipelineStatus::Inconclusive => 1,
    })
}

fn cmd_export(
    system: &Path,
    _format: ExportFormat,
    observer: bool,
    delta: f64,
    out: &Option<PathBuf>,
) -> Result<i32, CliError> {
    let sys = read_system(system)?;
    let content = if observer {
        let obs = build_observer(&sys, delta)?;
        observer_dot(&sys, &obs)
    } else {
        system_dot(&sys)
    };
    write_or_print(out, &content)?;
    Ok(0)
}

/// Parses `std::env::args`, runs one subcommand, and returns the process
/// exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Verify {
            system,
            delta,
            k,
            witness,
            method,
            horizon,
            json,
        } => cmd_verify(system, *delta, *k, *witness, *method, *horizon, *json),
        Cmd::Abstract {
            spec,
            eta,
            mu,
            theta,
            epsilon,
            secret_mode,
            unchecked,
            out,
        } => cmd_abstract(
            spec,
            *eta,
            *mu,
            *theta,
            *epsilon,
            (*secret_mode).into(),
            *unchecked,
            out,
        ),
        Cmd::Relate {
            left,
            right,
            epsilon,
            check,
            json,
        } => cmd_relate(left, right, *epsilon, check, *json),
        Cmd::Pipeline {
            spec,
            eta,
            mu,
            theta,
            epsilon,
            delta,
            k,
            secret_mode,
            out,
        } => cmd_pipeline(
            spec,
            *eta,
            *mu,
            *theta,
            *epsilon,
            *delta,
            *k,
            (*secret_mode).into(),
            out,
        ),
        Cmd::Export {
            system,
            format,
            observer,
            delta,
            out,
        } => cmd_export(system, *format, *observer, *delta, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
