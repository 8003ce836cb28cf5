//! Rolling-horizon assignment: one cascade of models per period, with the
//! rooms of in-hospital patients carried forward.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::combinatorics::{check_feasibility, greedy_assignment, s_max_total, SmaxOptions, SmaxProfile};
use crate::evaluate::{count_private_single_days, count_transfers, Assignment};
use crate::formulations::{build_with_smax, encode_assignment, extract_assignment, Formulation, FormulationError, Variant, VariantId};
use crate::instance::{census, Instance, InstanceError, Patient, Period, PreAssignment};
use crate::solver::{solve_from, Backend, SolveLimits, SolveResult, SolveStatus};

#[derive(Debug, thiserror::Error)]
pub enum DynamicError {
    #[error("step {t}: building the window instance failed: {source}")]
    Window { t: Period, source: InstanceError },
    #[error("step {t}: {source}")]
    Formulation { t: Period, source: FormulationError },
    #[error("step {t}: backend error in stage {stage}: {message}")]
    Backend { t: Period, stage: Stage, message: String },
    #[error("step {t}: variant H found no solution within the limits")]
    NoSolution { t: Period },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicConfig {
    /// Whole budget of the Ostar solve, split evenly over its two stages.
    pub ostar_time_limit: Duration,
    pub backend: Backend,
    /// Per-stage limits for P, Pstar and H; the node limit also bounds Ostar.
    pub stage_limits: SolveLimits,
    pub smax: SmaxOptions,
}

impl Default for DynamicConfig {
    fn default() -> Self {
        DynamicConfig {
            ostar_time_limit: Duration::from_secs(20),
            backend: Backend::Embedded,
            stage_limits: SolveLimits::default(),
            smax: SmaxOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Stage {
    CombinatorialInfeasible,
    P,
    Pstar,
    Ostar,
    H,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::CombinatorialInfeasible => "infeasible",
            Stage::P => "P",
            Stage::Pstar => "Pstar",
            Stage::Ostar => "Ostar",
            Stage::H => "H",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicState {
    pub t: Period,
    pub known_patients: Vec<String>,
    /// Room of every in-hospital patient, fixed by earlier steps.
    pub rpold: BTreeMap<String, String>,
}

impl DynamicState {
    pub fn initial(instance: &Instance) -> Self {
        DynamicState {
            t: 1,
            known_patients: Vec::new(),
            rpold: instance
                .pre_assignments
                .iter()
                .map(|a| (a.patient.clone(), a.room.clone()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepResult {
    pub t: Period,
    pub stage: Stage,
    /// The accepted solve; `None` when the step terminated the run.
    pub solve: Option<SolveResult>,
    /// Last period of the planning window.
    pub window_end: Period,
    /// Planned rooms over the window, in original periods.
    pub assignment_fragment: Assignment,
    pub transfers_incurred: u64,
    pub singles_achieved: u64,
    pub s_max_t: Option<u32>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepSummary {
    pub t: Period,
    pub stage: Stage,
    pub wall_time_s: f64,
    pub transfers: u64,
    pub singles: u64,
    pub s_max_t: Option<u32>,
}

impl From<&StepResult> for StepSummary {
    fn from(s: &StepResult) -> Self {
        StepSummary {
            t: s.t,
            stage: s.stage,
            wall_time_s: s.wall_time.as_secs_f64(),
            transfers: s.transfers_incurred,
            singles: s.singles_achieved,
            s_max_t: s.s_max_t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DynamicTotals {
    pub f_trans: u64,
    pub f_priv: u64,
    /// `None` when some period's bound could not be computed.
    pub s_max: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicRunResult {
    pub steps: Vec<StepSummary>,
    #[serde(skip)]
    pub realized: Assignment,
    pub totals: DynamicTotals,
    /// Period at which a combinatorially infeasible window stopped the run.
    pub terminated_at: Option<Period>,
}

pub const ITERATION_CSV_HEADER: &str = "t,stage,wall_time_s,transfers,singles,s_max_t";

impl DynamicRunResult {
    pub fn completed(&self) -> bool {
        self.terminated_at.is_none()
    }

    /// Per-iteration CSV. With `timings == false` the runtime column is
    /// zeroed so runs can be compared byte for byte.
    pub fn iteration_csv(&self, timings: bool) -> String {
        let mut out = String::from(ITERATION_CSV_HEADER);
        out.push('\n');
        for s in &self.steps {
            let wall = if timings { s.wall_time_s } else { 0.0 };
            let smax = s.s_max_t.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{:.6},{},{},{}\n",
                s.t, s.stage, wall, s.transfers, s.singles, smax
            ));
        }
        out
    }

    pub fn runtimes(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.wall_time_s).collect()
    }

    pub fn step_transfer_sum(&self) -> u64 {
        self.steps.iter().map(|s| s.transfers).sum()
    }

    pub fn step_single_sum(&self) -> u64 {
        self.steps.iter().map(|s| s.singles).sum()
    }
}

/// The window instance seen at step `t`, re-indexed so that `t` becomes
/// period 1. Patients already in hospital arrive at 0 with their room
/// pre-assigned.
struct Window {
    instance: Instance,
    end: Period,
}

fn window_instance(instance: &Instance, state: &DynamicState) -> Result<Window, DynamicError> {
    let t = state.t;
    let known: Vec<&Patient> = instance
        .patients
        .iter()
        .filter(|p| p.registration <= t && p.discharge > t)
        .collect();
    let end = known
        .iter()
        .map(|p| p.discharge)
        .max()
        .unwrap_or(t)
        .min(instance.horizon)
        .max(t);
    let shift = |period: Period| period + 1 - t;
    let mut patients = Vec::with_capacity(known.len());
    let mut pre = Vec::new();
    for p in &known {
        let carried = state.rpold.contains_key(&p.id);
        let arrival = if carried || p.arrival < t { 0 } else { shift(p.arrival) };
        patients.push(Patient {
            id: p.id.clone(),
            sex: p.sex,
            registration: 0,
            arrival,
            discharge: shift(p.discharge),
            private: p.private,
        });
        if let Some(room) = state.rpold.get(&p.id) {
            pre.push(PreAssignment {
                patient: p.id.clone(),
                room: room.clone(),
            });
        }
    }
    let ids: HashSet<&str> = known.iter().map(|p| p.id.as_str()).collect();
    let conflicts = instance
        .conflicts
        .iter()
        .filter(|(a, b)| ids.contains(a.as_str()) && ids.contains(b.as_str()))
        .cloned()
        .collect();
    let sub = Instance::new(instance.ward.clone(), end + 1 - t, patients, pre, conflicts)
        .map_err(|source| DynamicError::Window { t, source })?;
    Ok(Window { instance: sub, end })
}

struct Attempt {
    formulation: Formulation,
    result: SolveResult,
}

fn attempt(
    t: Period,
    stage: Stage,
    window: &Instance,
    id: VariantId,
    profile: Option<&SmaxProfile>,
    backend: &Backend,
    limits: &SolveLimits,
    greedy_start: bool,
) -> Result<Option<Attempt>, DynamicError> {
    let mut variant = Variant::plain(id);
    variant.options.with_conflicts = !window.conflicts.is_empty();
    let formulation =
        build_with_smax(window, variant, profile).map_err(|source| DynamicError::Formulation { t, source })?;
    let start = if greedy_start {
        greedy_assignment(window).and_then(|a| encode_assignment(window, &formulation, &a).ok())
    } else {
        None
    };
    let result = solve_from(&formulation.model, backend, limits, start.as_ref());
    if result.status == SolveStatus::BackendError {
        return Err(DynamicError::Backend {
            t,
            stage,
            message: result.diagnostics,
        });
    }
    Ok(result.has_solution().then_some(Attempt { formulation, result }))
}

/// One iteration of the cascade at `state.t`.
pub fn step(
    instance: &Instance,
    state: &DynamicState,
    config: &DynamicConfig,
) -> Result<(StepResult, DynamicState), DynamicError> {
    if config.ostar_time_limit.is_zero() {
        return Err(DynamicError::Config("ostar_time_limit must be positive".into()));
    }
    let start = Instant::now();
    let t = state.t;
    // discharged patients leave the pre-assignment set first
    let mut rpold = state.rpold.clone();
    let lookup = instance.patient_lookup();
    rpold.retain(|id, _| lookup.get(id.as_str()).is_some_and(|&p| instance.patients[p].discharge > t));
    let state = DynamicState {
        t,
        known_patients: instance
            .patients
            .iter()
            .filter(|p| p.registration <= t)
            .map(|p| p.id.clone())
            .collect(),
        rpold,
    };
    let window = window_instance(instance, &state)?;
    let sub = &window.instance;

    let next_state = |rpold: BTreeMap<String, String>| DynamicState {
        t: t + 1,
        known_patients: state.known_patients.clone(),
        rpold,
    };
    let feasible = sub
        .periods()
        .all(|p| check_feasibility(&census(sub, p).expect("window period")).feasible);
    if !feasible {
        let result = StepResult {
            t,
            stage: Stage::CombinatorialInfeasible,
            solve: None,
            window_end: window.end,
            assignment_fragment: Assignment::new(),
            transfers_incurred: 0,
            singles_achieved: 0,
            s_max_t: None,
            wall_time: start.elapsed(),
        };
        return Ok((result, next_state(state.rpold.clone())));
    }

    let profile = s_max_total(sub, &config.smax).ok();
    let s_max_t = profile.as_ref().map(|p| p.periods[0].value);
    let limits = config.stage_limits;
    let backend = &config.backend;
    let mut chosen = None;
    if let Some(profile) = &profile {
        for (stage, id) in [(Stage::P, VariantId::P), (Stage::Pstar, VariantId::Pstar)] {
            if let Some(a) = attempt(t, stage, sub, id, Some(profile), backend, &limits, false)? {
                chosen = Some((stage, a));
                break;
            }
        }
    }
    if chosen.is_none() {
        let ostar_limits = SolveLimits {
            time_limit: Some(config.ostar_time_limit / 2),
            node_limit: limits.node_limit,
        };
        if let Some(a) = attempt(t, Stage::Ostar, sub, VariantId::Ostar, None, backend, &ostar_limits, false)? {
            chosen = Some((Stage::Ostar, a));
        }
    }
    if chosen.is_none() {
        match attempt(t, Stage::H, sub, VariantId::H, None, backend, &limits, true)? {
            Some(a) => chosen = Some((Stage::H, a)),
            None => return Err(DynamicError::NoSolution { t }),
        }
    }
    let (stage, Attempt { formulation, result }) = chosen.expect("cascade ends with H");
    let values = formulation.polish(sub, result.values.as_ref().expect("accepted solves carry values"));
    let plan = extract_assignment(sub, &formulation, &values).map_err(|source| DynamicError::Formulation { t, source })?;

    let mut fragment = Assignment::new();
    for (patient, period, room) in plan.iter() {
        fragment.set(patient, period + t - 1, room);
    }
    let mut transfers = 0;
    let mut singles = 0;
    let mut occupancy: HashMap<&str, u32> = HashMap::new();
    let mut next_rpold = BTreeMap::new();
    for p in instance.patients.iter().filter(|p| p.is_present(t)) {
        let room = fragment
            .get(&p.id, t)
            .expect("present patients are known and planned")
            .to_string();
        if state.rpold.get(&p.id).is_some_and(|old| *old != room) {
            transfers += 1;
        }
        next_rpold.insert(p.id.clone(), room);
    }
    for room in next_rpold.values() {
        *occupancy.entry(room.as_str()).or_default() += 1;
    }
    for p in instance.patients.iter().filter(|p| p.is_present(t) && p.private) {
        if occupancy[next_rpold[&p.id].as_str()] == 1 {
            singles += 1;
        }
    }
    let result = StepResult {
        t,
        stage,
        solve: Some(SolveResult {
            values: Some(values),
            ..result
        }),
        window_end: window.end,
        assignment_fragment: fragment,
        transfers_incurred: transfers,
        singles_achieved: singles,
        s_max_t,
        wall_time: start.elapsed(),
    };
    Ok((result, next_state(next_rpold)))
}

/// Runs the cascade for every period of the horizon.
pub fn run_dynamic(instance: &Instance, config: &DynamicConfig) -> Result<DynamicRunResult, DynamicError> {
    let mut state = DynamicState::initial(instance);
    let mut steps = Vec::with_capacity(instance.horizon as usize);
    let mut realized = Assignment::new();
    let mut terminated_at = None;
    for t in instance.periods() {
        let (result, next) = step(instance, &state, config)?;
        steps.push(StepSummary::from(&result));
        if result.stage == Stage::CombinatorialInfeasible {
            terminated_at = Some(t);
            break;
        }
        for (patient, room) in &next.rpold {
            realized.set(patient.clone(), t, room.clone());
        }
        state = next;
    }
    let step_trans: u64 = steps.iter().map(|s| s.transfers).sum();
    let step_priv: u64 = steps.iter().map(|s| s.singles).sum();
    let (f_trans, f_priv) = if terminated_at.is_none() {
        let trans = count_transfers(instance, &realized).expect("complete realized assignment");
        let private = count_private_single_days(instance, &realized).expect("complete realized assignment");
        debug_assert_eq!((trans, private), (step_trans, step_priv));
        (trans, private)
    } else {
        (step_trans, step_priv)
    };
    let s_max = s_max_total(instance, &config.smax).ok().map(|p| p.total);
    Ok(DynamicRunResult {
        steps,
        realized,
        totals: DynamicTotals { f_trans, f_priv, s_max },
        terminated_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::validate_assignment;
    use crate::instance::fixtures::{patient, two_room_example};
    use crate::instance::{Sex, Ward};

    #[test]
    fn example_full_run() {
        let inst = two_room_example();
        let run = run_dynamic(&inst, &DynamicConfig::default()).unwrap();
        assert!(run.completed());
        assert_eq!(run.steps.len(), 3);
        assert!(validate_assignment(&inst, &run.realized).is_valid());
        assert_eq!(run.totals.f_trans, run.step_transfer_sum());
        assert_eq!(run.totals.f_priv, run.step_single_sum());
        assert!(run.totals.f_priv <= run.totals.s_max.unwrap());
        for s in &run.steps {
            if s.stage == Stage::P {
                assert_eq!(s.transfers, 0);
            }
        }
    }

    #[test]
    fn empty_instance() {
        let inst = Instance::new(Ward::from_capacities(&[2, 2]), 4, vec![], vec![], vec![]).unwrap();
        let run = run_dynamic(&inst, &DynamicConfig::default()).unwrap();
        assert_eq!(run.steps.len(), 4);
        assert_eq!(run.totals, DynamicTotals { f_trans: 0, f_priv: 0, s_max: Some(0) });
        assert_eq!(run.iteration_csv(false).lines().count(), 5);
    }

    #[test]
    fn infeasible_census_terminates() {
        let mut patients = Vec::new();
        for i in 0..3 {
            patients.push(patient(&format!("f{i}"), Sex::Female, 1, 3, false));
            patients.push(patient(&format!("m{i}"), Sex::Male, 1, 3, false));
        }
        let inst = Instance::new(Ward::from_capacities(&[2, 2, 2]), 2, patients, vec![], vec![]).unwrap();
        let run = run_dynamic(&inst, &DynamicConfig::default()).unwrap();
        assert_eq!(run.terminated_at, Some(1));
        assert_eq!(run.steps[0].stage, Stage::CombinatorialInfeasible);
    }

    #[test]
    fn carried_patients_stay_under_p() {
        let inst = Instance::new(
            Ward::from_capacities(&[2, 2]),
            3,
            vec![
                patient("a", Sex::Female, 0, 3, false),
                patient("b", Sex::Male, 1, 4, true),
            ],
            vec![PreAssignment {
                patient: "a".into(),
                room: "r2".into(),
            }],
            vec![],
        )
        .unwrap();
        let (r, next) = step(&inst, &DynamicState::initial(&inst), &DynamicConfig::default()).unwrap();
        assert_eq!(r.stage, Stage::P);
        assert_eq!(r.transfers_incurred, 0);
        assert_eq!(next.rpold["a"], "r2");
        assert_eq!(next.rpold["b"], "r1");
        assert_eq!(r.singles_achieved, 1);
    }
}
