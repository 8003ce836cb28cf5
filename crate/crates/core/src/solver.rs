//! Lexicographic solve driver over the embedded search or an external
//! solver reached through files.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::model::{
    bruteforce_solve_from, parse_solution, parse_status, write_lp, BipModel, Objective, Relation, SearchLimits,
    SearchStatus, SolutionStatus, VarAssignment,
};

pub const DEFAULT_ENV_ALLOWLIST: &[&str] = &["PATH", "HOME", "LD_LIBRARY_PATH", "PYTHONPATH", "TMPDIR"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalBackend {
    /// Shell command with `{model_path}`, `{solution_path}` and optionally
    /// `{time_limit}` (seconds, `inf` when unset).
    pub command_template: String,
    pub working_dir: Option<PathBuf>,
    pub env_allowlist: Vec<String>,
}

impl ExternalBackend {
    pub fn new(command_template: impl Into<String>) -> Self {
        ExternalBackend {
            command_template: command_template.into(),
            working_dir: None,
            env_allowlist: DEFAULT_ENV_ALLOWLIST.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Backend {
    #[default]
    Embedded,
    External(ExternalBackend),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveLimits {
    /// Budget of each objective stage.
    pub time_limit: Option<Duration>,
    /// Decisions per stage for the embedded backend.
    pub node_limit: u64,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits {
            time_limit: None,
            node_limit: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    /// A limit stopped a stage but a solution is at hand.
    Feasible,
    Infeasible,
    /// A limit stopped the search before any solution was found.
    TimeLimit,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Optimal values of the completed stages, objective constants included.
    pub objective_values: Vec<i64>,
    pub values: Option<VarAssignment>,
    pub wall_time: Duration,
    pub diagnostics: String,
}

impl SolveResult {
    pub fn has_solution(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::Feasible) && self.values.is_some()
    }
}

enum StageOutcome {
    Optimal(VarAssignment),
    Infeasible,
    Limit(Option<VarAssignment>),
    Error(String),
}

/// Copy of `model` with a single objective and the fixing rows added.
fn stage_model(model: &BipModel, objective: &Objective, fixings: &[(Vec<(i64, usize)>, i64)]) -> BipModel {
    let mut m = model.clone();
    m.objectives = vec![objective.clone()];
    for (i, (terms, rhs)) in fixings.iter().enumerate() {
        m.add_constraint(terms.clone(), Relation::Eq, *rhs, format!("fix_stage_{i}"))
            .expect("fixing rows reference model variables");
    }
    m
}

fn embedded_stage(model: &BipModel, limits: &SolveLimits, start: Option<&VarAssignment>) -> StageOutcome {
    let out = bruteforce_solve_from(
        model,
        &SearchLimits {
            node_limit: limits.node_limit,
            time_limit: limits.time_limit,
        },
        start,
    );
    match (out.status, out.values) {
        (SearchStatus::Optimal, Some(v)) => StageOutcome::Optimal(v),
        (SearchStatus::Infeasible, _) => StageOutcome::Infeasible,
        (SearchStatus::NodeLimit, v) => StageOutcome::Limit(v),
        (SearchStatus::Optimal, None) => StageOutcome::Error("optimal without values".into()),
    }
}

static RUN_COUNTER: AtomicU64 = AtomicU64::new(0);

fn quote(path: &Path) -> String {
    format!("'{}'", path.display().to_string().replace('\'', "'\\''"))
}

fn external_stage(model: &BipModel, backend: &ExternalBackend, limits: &SolveLimits) -> StageOutcome {
    let dir = match tempfile::Builder::new().prefix("pra-solve-").tempdir() {
        Ok(d) => d,
        Err(e) => return StageOutcome::Error(format!("temp dir: {e}")),
    };
    let run_id = format!("run{}_{}", std::process::id(), RUN_COUNTER.fetch_add(1, Ordering::Relaxed));
    let model_path = dir.path().join(format!("{run_id}.lp"));
    let solution_path = dir.path().join(format!("{run_id}.sol"));
    let text = match write_lp(model, 0) {
        Ok(t) => t,
        Err(e) => return StageOutcome::Error(e.to_string()),
    };
    if let Err(e) = std::fs::write(&model_path, text) {
        return StageOutcome::Error(format!("writing model: {e}"));
    }
    let time_limit = limits
        .time_limit
        .map_or_else(|| "inf".to_string(), |d| format!("{}", d.as_secs_f64()));
    let command = backend
        .command_template
        .replace("{model_path}", &quote(&model_path))
        .replace("{solution_path}", &quote(&solution_path))
        .replace("{time_limit}", &time_limit);
    let mut cmd = Command::new("sh");
    cmd.arg("-c").arg(&command).env_clear();
    for key in &backend.env_allowlist {
        if let Ok(v) = std::env::var(key) {
            cmd.env(key, v);
        }
    }
    if let Some(dir) = &backend.working_dir {
        cmd.current_dir(dir);
    }
    let output = match cmd.output() {
        Ok(o) => o,
        Err(e) => return StageOutcome::Error(format!("spawning {command:?}: {e}")),
    };
    if !output.status.success() {
        return StageOutcome::Error(format!(
            "{command:?} exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        ));
    }
    let text = match std::fs::read_to_string(&solution_path) {
        Ok(t) => t,
        Err(e) => return StageOutcome::Error(format!("reading solution: {e}")),
    };
    let status = match parse_status(&text) {
        Ok(s) => s,
        Err(e) => return StageOutcome::Error(format!("solution status: {e}")),
    };
    let has_values = text
        .lines()
        .map(str::trim)
        .any(|l| !l.is_empty() && !l.starts_with('#') && !l.starts_with("STATUS"));
    let values = if has_values {
        match parse_solution(&text, model) {
            Ok(v) => Some(v),
            Err(e) => return StageOutcome::Error(format!("solution values: {e}")),
        }
    } else {
        None
    };
    match (status, values) {
        (SolutionStatus::Optimal, Some(v)) => StageOutcome::Optimal(v),
        (SolutionStatus::Optimal, None) => StageOutcome::Error("optimal status without values".into()),
        (SolutionStatus::Infeasible, _) => StageOutcome::Infeasible,
        (SolutionStatus::TimeLimit, v) => StageOutcome::Limit(v),
    }
}

/// Solves the objective stack in priority order, fixing each optimum by an
/// equality before the next stage.
pub fn solve(model: &BipModel, backend: &Backend, limits: &SolveLimits) -> SolveResult {
    solve_from(model, backend, limits, None)
}

/// As [`solve`] with a feasible starting point for the embedded backend;
/// later stages start from the previous stage's optimum. External
/// solvers ignore it.
pub fn solve_from(
    model: &BipModel,
    backend: &Backend,
    limits: &SolveLimits,
    warm_start: Option<&VarAssignment>,
) -> SolveResult {
    let start = Instant::now();
    let zero = Objective {
        sense: crate::model::Sense::Maximize,
        expr: Default::default(),
        label: "zero".into(),
    };
    let objectives: Vec<&Objective> = if model.objectives.is_empty() {
        vec![&zero]
    } else {
        model.objectives.iter().collect()
    };
    let mut fixings: Vec<(Vec<(i64, usize)>, i64)> = Vec::new();
    let mut objective_values = Vec::new();
    let mut best: Option<VarAssignment> = warm_start
        .filter(|v| v.len() == model.num_vars() && model.violated_constraints(v).is_empty())
        .cloned();
    let mut diagnostics = String::new();
    let finish = |status, objective_values, values, diagnostics| SolveResult {
        status,
        objective_values,
        values,
        wall_time: start.elapsed(),
        diagnostics,
    };
    for (stage, objective) in objectives.iter().enumerate() {
        let m = stage_model(model, objective, &fixings);
        let outcome = match backend {
            Backend::Embedded => embedded_stage(&m, limits, best.as_ref()),
            Backend::External(ext) => external_stage(&m, ext, limits),
        };
        match outcome {
            StageOutcome::Optimal(values) => {
                let value = objective.expr.evaluate(&values);
                objective_values.push(value);
                fixings.push((objective.expr.terms.clone(), value - objective.expr.constant));
                best = Some(values);
            }
            StageOutcome::Infeasible if stage == 0 => {
                return finish(SolveStatus::Infeasible, objective_values, None, diagnostics);
            }
            StageOutcome::Infeasible => {
                diagnostics.push_str(&format!("stage {stage} infeasible after fixing; "));
                return finish(SolveStatus::BackendError, objective_values, best, diagnostics);
            }
            StageOutcome::Limit(values) => {
                let values = values.or(best);
                let status = if values.is_some() {
                    SolveStatus::Feasible
                } else {
                    SolveStatus::TimeLimit
                };
                diagnostics.push_str(&format!("limit reached in stage {stage}; "));
                return finish(status, objective_values, values, diagnostics);
            }
            StageOutcome::Error(e) => {
                diagnostics.push_str(&e);
                return finish(SolveStatus::BackendError, objective_values, None, diagnostics);
            }
        }
    }
    finish(SolveStatus::Optimal, objective_values, best, diagnostics)
}

/// Re-checks every constraint and every reported stage value.
pub fn verify(model: &BipModel, result: &SolveResult) -> bool {
    let Some(values) = &result.values else {
        return false;
    };
    if values.len() != model.num_vars() || !model.violated_constraints(values).is_empty() {
        return false;
    }
    if result.objective_values.len() > model.objectives.len().max(1) {
        return false;
    }
    result
        .objective_values
        .iter()
        .zip(model.objectives.iter())
        .all(|(&v, o)| o.expr.evaluate(values) == v)
}
