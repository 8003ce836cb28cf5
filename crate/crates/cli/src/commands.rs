use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use pra_core::combinatorics::{
    check_feasibility, greedy_assignment, s_max_for_census, SmaxOptions, SmaxSource,
};
use pra_core::dynamic::{run_dynamic, DynamicConfig, DynamicError};
use pra_core::evaluate::validate_assignment;
use pra_core::formulations::{
    build, encode_assignment, evaluate_objectives, extract_assignment, FormulationError, Variant, VariantId,
    VariantOptions,
};
use pra_core::generator::{generate, GeneratorParams};
use pra_core::instance::{census, instance_to_json, load_instance, Instance};
use pra_core::model::{bruteforce_solve, read_lp, render_solution, SearchLimits, SearchStatus, SolutionStatus};
use pra_core::solver::{solve_from, verify, Backend, ExternalBackend, SolveLimits, SolveStatus};

use crate::svg::runtime_chart;
use crate::{BackendArgs, Batch};

pub const EXIT_OK: u8 = 0;
pub const EXIT_DOMAIN_INFEASIBLE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_MODEL_INFEASIBLE: u8 = 3;
pub const EXIT_TIMEOUT: u8 = 4;
pub const EXIT_TERMINATED: u8 = 5;

pub struct Outcome {
    stdout: String,
    code: u8,
}

impl Outcome {
    pub fn error(e: anyhow::Error, code: u8) -> Self {
        eprintln!("error: {e:#}");
        Outcome {
            stdout: String::new(),
            code,
        }
    }

    pub fn emit(self) -> ExitCode {
        if !self.stdout.is_empty() {
            println!("{}", self.stdout);
        }
        ExitCode::from(self.code)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodRow {
    pub t: u32,
    pub female: u32,
    pub male: u32,
    pub female_private: u32,
    pub male_private: u32,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_max_t: Option<u32>,
    /// The bound comes from a node-limited search and may be low.
    pub heuristic: bool,
}

#[derive(Debug, Default, Serialize)]
pub struct RunReport {
    pub instance: String,
    pub periods: Vec<PeriodRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_max_total: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dynamic: Option<Value>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct InstanceOutcome {
    pub report: RunReport,
    pub code: u8,
}

fn failed(instance: &Path, e: anyhow::Error, code: u8) -> InstanceOutcome {
    eprintln!("{}: {e:#}", instance.display());
    InstanceOutcome {
        report: RunReport {
            instance: instance_id(instance),
            error: Some(format!("{e:#}")),
            ..Default::default()
        },
        code,
    }
}

fn instance_id(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// `base` itself for a single instance, `base/<stem>.<ext>` otherwise.
pub fn derived_path(base: Option<&Path>, instance: &Path, ext: &str, n_instances: usize) -> Option<PathBuf> {
    let base = base?;
    if n_instances == 1 {
        return Some(base.to_path_buf());
    }
    let _ = std::fs::create_dir_all(base);
    Some(base.join(format!("{}.{ext}", instance_id(instance))))
}

/// Runs `f` over every instance of the batch on `--jobs` threads.
pub fn batch<F>(batch: &Batch, ext: &str, f: F) -> Outcome
where
    F: Fn(&Path, Option<&Path>) -> InstanceOutcome + Sync,
{
    let n = batch.instances.len();
    for base in [&batch.out].into_iter().flatten() {
        if n > 1 {
            if let Err(e) = std::fs::create_dir_all(base) {
                return Outcome::error(anyhow::anyhow!("creating {}: {e}", base.display()), EXIT_INPUT);
            }
        }
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(batch.jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => return Outcome::error(e.into(), EXIT_INPUT),
    };
    let outcomes: Vec<InstanceOutcome> = pool.install(|| {
        batch
            .instances
            .par_iter()
            .map(|path| {
                let out = derived_path(batch.out.as_deref(), path, ext, n);
                f(path, out.as_deref())
            })
            .collect()
    });
    let code = outcomes.iter().map(|o| o.code).max().unwrap_or(EXIT_OK);
    let stdout = if n == 1 {
        serde_json::to_string_pretty(&outcomes[0].report)
    } else {
        serde_json::to_string_pretty(&outcomes.iter().map(|o| &o.report).collect::<Vec<_>>())
    }
    .expect("reports serialize");
    Outcome { stdout, code }
}

fn load(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(load_instance(&text)?)
}

fn write(path: &Path, content: &str, outputs: &mut Vec<String>) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
    outputs.push(path.display().to_string());
    Ok(())
}

fn census_rows(instance: &Instance, with_smax: bool) -> (Vec<PeriodRow>, Option<u64>) {
    let opts = SmaxOptions::default();
    let mut total = Some(0u64);
    let rows = instance
        .periods()
        .map(|t| {
            let c = census(instance, t).expect("period within horizon");
            let verdict = check_feasibility(&c);
            let (s_max_t, heuristic) = if with_smax && verdict.feasible {
                match s_max_for_census(&c, &opts) {
                    Ok((v, source)) => (Some(v), source == SmaxSource::IpHeuristic),
                    Err(_) => (None, false),
                }
            } else {
                (None, false)
            };
            total = match (total, s_max_t) {
                (Some(a), Some(b)) => Some(a + b as u64),
                _ => None,
            };
            PeriodRow {
                t,
                female: c.female,
                male: c.male,
                female_private: c.female_private,
                male_private: c.male_private,
                feasible: verdict.feasible,
                method: Some(format!("{:?}", verdict.method)),
                s_max_t,
                heuristic,
            }
        })
        .collect();
    (rows, if with_smax { total } else { None })
}

fn rows_csv(rows: &[PeriodRow]) -> String {
    let mut out = String::from("t,female,male,female_private,male_private,feasible,method,s_max_t,heuristic\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.t,
            r.female,
            r.male,
            r.female_private,
            r.male_private,
            r.feasible,
            r.method.as_deref().unwrap_or(""),
            r.s_max_t.map(|v| v.to_string()).unwrap_or_default(),
            r.heuristic
        ));
    }
    out
}

fn census_command(path: &Path, out: Option<&Path>, with_smax: bool) -> InstanceOutcome {
    let instance = match load(path) {
        Ok(i) => i,
        Err(e) => return failed(path, e, EXIT_INPUT),
    };
    let (periods, total) = census_rows(&instance, with_smax);
    let mut report = RunReport {
        instance: instance_id(path),
        s_max_total: total,
        ..Default::default()
    };
    if let Some(out) = out {
        if let Err(e) = write(out, &rows_csv(&periods), &mut report.outputs) {
            return failed(path, e, EXIT_INPUT);
        }
    }
    let code = if periods.iter().all(|r| r.feasible) { EXIT_OK } else { EXIT_DOMAIN_INFEASIBLE };
    report.periods = periods;
    InstanceOutcome { report, code }
}

pub fn check(path: &Path, out: Option<&Path>) -> InstanceOutcome {
    census_command(path, out, false)
}

pub fn smax(path: &Path, out: Option<&Path>) -> InstanceOutcome {
    census_command(path, out, true)
}

fn backend_from(args: &BackendArgs) -> Backend {
    match &args.backend_cmd {
        Some(cmd) => Backend::External(ExternalBackend::new(cmd.clone())),
        None => Backend::Embedded,
    }
}

fn seconds(value: f64, flag: &str) -> Result<Duration> {
    if !(value.is_finite() && value > 0.0) {
        bail!("{flag} must be a positive number of seconds");
    }
    Ok(Duration::from_secs_f64(value))
}

pub struct SolveOptions {
    variant: Variant,
    backend: Backend,
    limits: SolveLimits,
}

impl SolveOptions {
    pub fn new(backend: &BackendArgs, variant: &str, time_limit: Option<f64>, conflicts: bool, cuts: bool) -> Result<Self> {
        let id: VariantId = variant.parse()?;
        Ok(SolveOptions {
            variant: Variant {
                id,
                options: VariantOptions {
                    with_conflicts: conflicts,
                    with_objective_cuts: cuts,
                },
            },
            backend: backend_from(backend),
            limits: SolveLimits {
                time_limit: time_limit.map(|t| seconds(t, "--time-limit")).transpose()?,
                node_limit: backend.node_limit,
            },
        })
    }
}

#[derive(Serialize)]
struct SolveSummary {
    variant: String,
    status: SolveStatus,
    objectives: Vec<String>,
    objective_values: Vec<i64>,
    f_trans: Option<u64>,
    f_priv: Option<u64>,
    wall_time_s: f64,
    diagnostics: String,
}

pub fn solve(path: &Path, out: Option<&Path>, opts: &SolveOptions) -> InstanceOutcome {
    let instance = match load(path) {
        Ok(i) => i,
        Err(e) => return failed(path, e, EXIT_INPUT),
    };
    let (periods, s_max) = census_rows(&instance, true);
    let mut report = RunReport {
        instance: instance_id(path),
        periods,
        s_max_total: s_max,
        ..Default::default()
    };
    let all_feasible = report.periods.iter().all(|r| r.feasible);
    let formulation = match build(&instance, opts.variant) {
        Ok(f) => f,
        Err(FormulationError::MissingSmax(..)) if !all_feasible => {
            return failed(path, anyhow::anyhow!("a period is combinatorially infeasible"), EXIT_DOMAIN_INFEASIBLE)
        }
        Err(e) => return failed(path, e.into(), EXIT_INPUT),
    };
    let start = if opts.variant.id.stay_level() {
        None
    } else {
        greedy_assignment(&instance).and_then(|a| encode_assignment(&instance, &formulation, &a).ok())
    };
    let result = solve_from(&formulation.model, &opts.backend, &opts.limits, start.as_ref());
    let mut summary = SolveSummary {
        variant: opts.variant.id.to_string(),
        status: result.status,
        objectives: formulation.model.objectives.iter().map(|o| o.label.clone()).collect(),
        objective_values: result.objective_values.clone(),
        f_trans: None,
        f_priv: None,
        wall_time_s: result.wall_time.as_secs_f64(),
        diagnostics: result.diagnostics.clone(),
    };
    let code = match result.status {
        SolveStatus::Optimal | SolveStatus::Feasible => EXIT_OK,
        SolveStatus::Infeasible => EXIT_MODEL_INFEASIBLE,
        SolveStatus::TimeLimit => EXIT_TIMEOUT,
        SolveStatus::BackendError => EXIT_INPUT,
    };
    if code == EXIT_OK {
        if !verify(&formulation.model, &result) {
            return failed(path, anyhow::anyhow!("solution failed verification"), EXIT_INPUT);
        }
        let values = formulation.polish(&instance, result.values.as_ref().expect("verified"));
        let assignment = match extract_assignment(&instance, &formulation, &values) {
            Ok(a) => a,
            Err(e) => return failed(path, e.into(), EXIT_INPUT),
        };
        match evaluate_objectives(&instance, &formulation, &values) {
            Ok(obj) => {
                summary.f_trans = Some(obj.f_trans);
                summary.f_priv = Some(obj.f_priv);
            }
            Err(e) => return failed(path, e.into(), EXIT_INPUT),
        }
        if let Some(out) = out {
            if let Err(e) = write(out, &assignment.to_json(), &mut report.outputs) {
                return failed(path, e, EXIT_INPUT);
            }
        }
    }
    report.solve = Some(serde_json::to_value(summary).expect("summary serializes"));
    InstanceOutcome { report, code }
}

pub struct DynamicOptions {
    config: DynamicConfig,
}

impl DynamicOptions {
    pub fn new(backend: &BackendArgs, ostar: f64, stage: Option<f64>) -> Result<Self> {
        Ok(DynamicOptions {
            config: DynamicConfig {
                ostar_time_limit: seconds(ostar, "--time-limit")?,
                backend: backend_from(backend),
                stage_limits: SolveLimits {
                    time_limit: stage.map(|t| seconds(t, "--stage-time-limit")).transpose()?,
                    node_limit: backend.node_limit,
                },
                smax: SmaxOptions::default(),
            },
        })
    }
}

#[derive(Serialize)]
struct DynamicSummary {
    iterations: usize,
    stages: BTreeMap<String, usize>,
    f_trans: u64,
    f_priv: u64,
    s_max: Option<u64>,
    /// `f_priv / s_max`, 1 when the bound is zero.
    ratio: Option<f64>,
    terminated_at: Option<u32>,
    runtime_median_s: f64,
    runtime_max_s: f64,
    wall_time_s: f64,
    valid: Option<bool>,
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn dynamic(
    path: &Path,
    out: Option<&Path>,
    chart: Option<&Path>,
    assignment: Option<&Path>,
    opts: &DynamicOptions,
) -> InstanceOutcome {
    let instance = match load(path) {
        Ok(i) => i,
        Err(e) => return failed(path, e, EXIT_INPUT),
    };
    let start = Instant::now();
    let run = match run_dynamic(&instance, &opts.config) {
        Ok(r) => r,
        Err(e @ DynamicError::NoSolution { .. }) => return failed(path, e.into(), EXIT_TIMEOUT),
        Err(e) => return failed(path, e.into(), EXIT_INPUT),
    };
    let mut report = RunReport {
        instance: instance_id(path),
        ..Default::default()
    };
    let (periods, _) = census_rows(&instance, true);
    report.periods = periods;
    report.s_max_total = run.totals.s_max;
    let mut stages = BTreeMap::new();
    for s in &run.steps {
        *stages.entry(s.stage.to_string()).or_insert(0) += 1;
    }
    let runtimes = run.runtimes();
    let summary = DynamicSummary {
        iterations: run.steps.len(),
        stages,
        f_trans: run.totals.f_trans,
        f_priv: run.totals.f_priv,
        s_max: run.totals.s_max,
        ratio: run.totals.s_max.map(|s| if s == 0 { 1.0 } else { run.totals.f_priv as f64 / s as f64 }),
        terminated_at: run.terminated_at,
        runtime_median_s: median(&runtimes),
        runtime_max_s: runtimes.iter().copied().fold(0.0, f64::max),
        wall_time_s: start.elapsed().as_secs_f64(),
        valid: run
            .completed()
            .then(|| validate_assignment(&instance, &run.realized).is_valid()),
    };
    let mut writes = Vec::new();
    if let Some(out) = out {
        writes.push((out, run.iteration_csv(true)));
    }
    if let Some(chart) = chart {
        writes.push((chart, runtime_chart(&report.instance, &run.steps)));
    }
    if let Some(a) = assignment {
        writes.push((a, run.realized.to_json()));
    }
    for (p, content) in writes {
        if let Err(e) = write(p, &content, &mut report.outputs) {
            return failed(path, e, EXIT_INPUT);
        }
    }
    report.dynamic = Some(serde_json::to_value(summary).expect("summary serializes"));
    let code = if run.completed() { EXIT_OK } else { EXIT_TERMINATED };
    InstanceOutcome { report, code }
}

#[derive(Args, Clone)]
pub struct GenerateArgs {
    /// Parameter document (JSON); flags override its fields.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rooms: Option<usize>,
    #[arg(long)]
    pub days: Option<u32>,
    /// Mean arrivals per day.
    #[arg(long)]
    pub arrivals: Option<f64>,
    /// Instance file; printed to stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn generate_inner(args: &GenerateArgs) -> Result<(Instance, GeneratorParams)> {
    let mut params = match &args.params {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => GeneratorParams::default(),
    };
    if let Some(seed) = args.seed {
        params.seed = seed;
    }
    if let Some(rooms) = args.rooms {
        params.n_rooms = rooms;
    }
    if let Some(days) = args.days {
        params.days = days;
    }
    if let Some(a) = args.arrivals {
        params.mean_daily_arrivals = a;
    }
    Ok((generate(&params)?, params))
}

pub fn generate_cmd(args: &GenerateArgs) -> Outcome {
    let (instance, params) = match generate_inner(args) {
        Ok(r) => r,
        Err(e) => return Outcome::error(e, EXIT_INPUT),
    };
    let json = instance_to_json(&instance);
    match &args.out {
        None => Outcome {
            stdout: json,
            code: EXIT_OK,
        },
        Some(out) => {
            if let Err(e) = std::fs::write(out, json) {
                return Outcome::error(anyhow::anyhow!("writing {}: {e}", out.display()), EXIT_INPUT);
            }
            let report = serde_json::json!({
                "instance": out.display().to_string(),
                "seed": params.seed,
                "rooms": instance.ward.rooms.len(),
                "days": instance.horizon,
                "patients": instance.patients.len(),
                "pre_assignments": instance.pre_assignments.len(),
            });
            Outcome {
                stdout: serde_json::to_string_pretty(&report).expect("json"),
                code: EXIT_OK,
            }
        }
    }
}

pub fn adapter(model: &Path, solution: &Path, time_limit: Option<&str>) -> Outcome {
    let run = || -> Result<()> {
        let text = std::fs::read_to_string(model).with_context(|| format!("reading {}", model.display()))?;
        let m = read_lp(&text)?;
        let time_limit = match time_limit {
            None | Some("inf") => None,
            Some(t) => Some(seconds(t.parse().context("time limit")?, "time limit")?),
        };
        let out = bruteforce_solve(
            &m,
            &SearchLimits {
                time_limit,
                ..Default::default()
            },
        );
        let status = match out.status {
            SearchStatus::Optimal => SolutionStatus::Optimal,
            SearchStatus::Infeasible => SolutionStatus::Infeasible,
            SearchStatus::NodeLimit => SolutionStatus::TimeLimit,
        };
        std::fs::write(solution, render_solution(status, &m, out.values.as_ref()))
            .with_context(|| format!("writing {}", solution.display()))?;
        Ok(())
    };
    match run() {
        Ok(()) => Outcome {
            stdout: String::new(),
            code: EXIT_OK,
        },
        Err(e) => Outcome::error(e, EXIT_INPUT),
    }
}
