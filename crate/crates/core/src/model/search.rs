//! Embedded exhaustive solver: depth-first search over 0/1 values with
//! bound propagation on every row, used as an oracle backend.

use std::time::{Duration, Instant};

use super::{BipModel, Relation, Sense, VarAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchLimits {
    /// Decisions allowed over all objective stages together.
    pub node_limit: u64,
    pub time_limit: Option<Duration>,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            node_limit: 10_000_000,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStatus {
    Optimal,
    Infeasible,
    /// Node or time budget exhausted; the incumbent, if any, is returned.
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome {
    pub status: SearchStatus,
    /// Optimal values of the stages completed, in priority order.
    pub objective_values: Vec<i64>,
    pub values: Option<VarAssignment>,
    pub nodes: u64,
    pub hit_time_limit: bool,
}

/// `sum a x <= rhs`.
struct Row {
    terms: Vec<(i64, u32)>,
    rhs: i64,
    max_abs: i64,
}

const FREE: i8 = -1;

struct Engine {
    rows: Vec<Row>,
    occurrences: Vec<Vec<(u32, i64)>>,
    min_activity: Vec<i64>,
    max_activity: Vec<i64>,
    value: Vec<i8>,
    trail: Vec<u32>,
    queue: Vec<u32>,
    queued: Vec<bool>,
}

impl Engine {
    fn new(n_vars: usize, rows: Vec<Row>) -> Self {
        let mut occurrences = vec![Vec::new(); n_vars];
        let mut min_activity = Vec::with_capacity(rows.len());
        let mut max_activity = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let (mut low, mut high) = (0, 0);
            for &(a, v) in &row.terms {
                occurrences[v as usize].push((i as u32, a));
                low += a.min(0);
                high += a.max(0);
            }
            min_activity.push(low);
            max_activity.push(high);
        }
        let n_rows = rows.len();
        Engine {
            rows,
            occurrences,
            min_activity,
            max_activity,
            value: vec![FREE; n_vars],
            trail: Vec::with_capacity(n_vars),
            queue: (0..n_rows as u32).collect(),
            queued: vec![true; n_rows],
        }
    }

    fn enqueue(&mut self, row: u32) {
        if !self.queued[row as usize] {
            self.queued[row as usize] = true;
            self.queue.push(row);
        }
    }

    fn fix(&mut self, var: u32, val: i8) {
        self.value[var as usize] = val;
        self.trail.push(var);
        for k in 0..self.occurrences[var as usize].len() {
            let (row, a) = self.occurrences[var as usize][k];
            self.max_activity[row as usize] += a * val as i64 - a.max(0);
            let delta = if a > 0 { a * val as i64 } else { -a * (1 - val as i64) };
            if delta != 0 {
                self.min_activity[row as usize] += delta;
                self.enqueue(row);
            }
        }
    }

    fn undo(&mut self, len: usize) {
        while self.trail.len() > len {
            let var = self.trail.pop().unwrap() as usize;
            let val = self.value[var] as i64;
            for &(row, a) in &self.occurrences[var] {
                let delta = if a > 0 { a * val } else { -a * (1 - val) };
                self.min_activity[row as usize] -= delta;
                self.max_activity[row as usize] -= a * val - a.max(0);
            }
            self.value[var] = FREE;
        }
    }

    fn clear_queue(&mut self) {
        for &row in &self.queue {
            self.queued[row as usize] = false;
        }
        self.queue.clear();
    }

    /// True when `var = val` keeps every row except `skip` satisfied for
    /// any completion; the other value is then dominated.
    fn safe(&self, var: u32, val: i8, skip: u32) -> bool {
        self.occurrences[var as usize].iter().all(|&(row, a)| {
            row == skip || self.max_activity[row as usize] - a.max(0) + a * val as i64 <= self.rows[row as usize].rhs
        })
    }

    /// Returns false on a conflict.
    fn propagate(&mut self) -> bool {
        while let Some(row) = self.queue.pop() {
            self.queued[row as usize] = false;
            let slack = self.rows[row as usize].rhs - self.min_activity[row as usize];
            if slack < 0 {
                self.clear_queue();
                return false;
            }
            if self.rows[row as usize].max_abs <= slack {
                continue;
            }
            for k in 0..self.rows[row as usize].terms.len() {
                let (a, v) = self.rows[row as usize].terms[k];
                if self.value[v as usize] != FREE || a.abs() <= slack {
                    continue;
                }
                self.fix(v, if a > 0 { 0 } else { 1 });
            }
        }
        true
    }
}

fn push_rows(rows: &mut Vec<Row>, terms: &[(i64, usize)], relation: Relation, rhs: i64) {
    let le = |sign: i64| {
        let terms: Vec<(i64, u32)> = terms.iter().map(|&(a, v)| (sign * a, v as u32)).filter(|t| t.0 != 0).collect();
        let max_abs = terms.iter().map(|t| t.0.abs()).max().unwrap_or(0);
        Row {
            terms,
            rhs: sign * rhs,
            max_abs,
        }
    };
    match relation {
        Relation::Le => rows.push(le(1)),
        Relation::Ge => rows.push(le(-1)),
        Relation::Eq => {
            rows.push(le(1));
            rows.push(le(-1));
        }
    }
}

struct Budget {
    nodes: u64,
    node_limit: u64,
    deadline: Option<Instant>,
    timed_out: bool,
}

impl Budget {
    fn exhausted(&mut self) -> bool {
        if self.nodes >= self.node_limit {
            return true;
        }
        if self.nodes.is_multiple_of(256) {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.timed_out = true;
                    return true;
                }
            }
        }
        false
    }
}

enum StageEnd {
    Optimal,
    Exhausted,
}

/// Maximises `sense * objective` over the rows; `incumbent` is improved
/// in place.
fn solve_stage(
    n_vars: usize,
    mut rows: Vec<Row>,
    objective: &[(i64, usize)],
    sense: Sense,
    preferred: &[i8],
    incumbent: &mut Option<(i64, Vec<i8>)>,
    budget: &mut Budget,
) -> StageEnd {
    let sign = if sense == Sense::Maximize { 1 } else { -1 };
    // sign * obj >= best + 1, written as -sign * obj <= -(best + 1)
    let cut_terms: Vec<(i64, u32)> = objective
        .iter()
        .map(|&(a, v)| (-sign * a, v as u32))
        .filter(|t| t.0 != 0)
        .collect();
    let max_abs = cut_terms.iter().map(|t| t.0.abs()).max().unwrap_or(0);
    let cut_rhs = |best: i64| -(best + 1);
    let obj_row = rows.len() as u32;
    rows.push(Row {
        terms: cut_terms,
        rhs: incumbent.as_ref().map_or(i64::MAX / 4, |(b, _)| cut_rhs(*b)),
        max_abs,
    });
    let mut engine = Engine::new(n_vars, rows);
    let scaled = |values: &[i8]| -> i64 {
        objective
            .iter()
            .map(|&(a, v)| sign * a * values[v] as i64)
            .sum()
    };
    if let Some((best, values)) = incumbent.as_mut() {
        *best = scaled(values);
        engine.rows[obj_row as usize].rhs = cut_rhs(*best);
    }

    // (variable, trail length before the decision, second value tried)
    let mut decisions: Vec<(u32, usize, bool)> = Vec::new();
    let mut cursor = 0usize;
    let mut consistent = engine.propagate();
    loop {
        if consistent {
            while cursor < n_vars && engine.value[cursor] != FREE {
                cursor += 1;
            }
            if cursor == n_vars {
                let best = scaled(&engine.value);
                engine.rows[obj_row as usize].rhs = cut_rhs(best);
                *incumbent = Some((best, engine.value.clone()));
                consistent = false;
                continue;
            }
            if budget.exhausted() {
                return StageEnd::Exhausted;
            }
            let var = cursor as u32;
            if engine.safe(var, preferred[cursor], obj_row) {
                engine.fix(var, preferred[cursor]);
                engine.enqueue(obj_row);
                consistent = engine.propagate();
                continue;
            }
            budget.nodes += 1;
            decisions.push((var, engine.trail.len(), false));
            engine.fix(var, preferred[cursor]);
            engine.enqueue(obj_row);
            consistent = engine.propagate();
        } else {
            loop {
                let Some((var, len, second)) = decisions.pop() else {
                    return StageEnd::Optimal;
                };
                engine.undo(len);
                if !second {
                    decisions.push((var, len, true));
                    engine.fix(var, 1 - preferred[var as usize]);
                    engine.enqueue(obj_row);
                    cursor = var as usize;
                    consistent = engine.propagate();
                    break;
                }
            }
        }
    }
}

/// Lexicographic solve by sequential optimisation: each completed stage
/// adds an equality fixing its objective at the optimum before the next
/// stage starts from the previous solution.
pub fn bruteforce_solve(model: &BipModel, limits: &SearchLimits) -> SearchOutcome {
    bruteforce_solve_from(model, limits, None)
}

/// As [`bruteforce_solve`], starting from `start` as incumbent when it
/// satisfies every constraint.
pub fn bruteforce_solve_from(model: &BipModel, limits: &SearchLimits, start: Option<&VarAssignment>) -> SearchOutcome {
    let n = model.num_vars();
    let mut base_rows = Vec::new();
    for c in &model.constraints {
        push_rows(&mut base_rows, &c.terms, c.relation, c.rhs);
    }
    let mut preferred = vec![FREE; n];
    for objective in &model.objectives {
        let sign = if objective.sense == Sense::Maximize { 1 } else { -1 };
        for &(a, v) in &objective.expr.terms {
            if preferred[v] == FREE && a != 0 {
                preferred[v] = if sign * a > 0 { 1 } else { 0 };
            }
        }
    }
    let mut budget = Budget {
        nodes: 0,
        node_limit: limits.node_limit,
        deadline: limits.time_limit.map(|d| Instant::now() + d),
        timed_out: false,
    };
    let mut incumbent: Option<(i64, Vec<i8>)> = start
        .filter(|v| v.len() == n && model.violated_constraints(v).is_empty())
        .map(|v| (0, (0..n).map(|i| v.get(i) as i8).collect()));
    let mut objective_values = Vec::new();
    let objectives: Vec<_> = if model.objectives.is_empty() {
        vec![(Sense::Maximize, Vec::new(), 0)]
    } else {
        model
            .objectives
            .iter()
            .map(|o| (o.sense, o.expr.terms.clone(), o.expr.constant))
            .collect()
    };
    for (stage, (sense, terms, constant)) in objectives.iter().enumerate() {
        // stage preference first, then the global one
        let mut stage_pref = preferred.clone();
        let sign = if *sense == Sense::Maximize { 1 } else { -1 };
        for &(a, v) in terms {
            if a != 0 {
                stage_pref[v] = if sign * a > 0 { 1 } else { 0 };
            }
        }
        for p in stage_pref.iter_mut() {
            if *p == FREE {
                *p = 1;
            }
        }
        let rows: Vec<Row> = base_rows
            .iter()
            .map(|r| Row {
                terms: r.terms.clone(),
                rhs: r.rhs,
                max_abs: r.max_abs,
            })
            .collect();
        let end = solve_stage(n, rows, terms, *sense, &stage_pref, &mut incumbent, &mut budget);
        let values = incumbent.as_ref().map(|(_, v)| VarAssignment::from_bools(v.iter().map(|&x| x == 1).collect()));
        match end {
            StageEnd::Exhausted => {
                return SearchOutcome {
                    status: SearchStatus::NodeLimit,
                    objective_values,
                    values,
                    nodes: budget.nodes,
                    hit_time_limit: budget.timed_out,
                }
            }
            StageEnd::Optimal => {
                let Some((best, _)) = incumbent.as_ref() else {
                    debug_assert_eq!(stage, 0);
                    return SearchOutcome {
                        status: SearchStatus::Infeasible,
                        objective_values,
                        values: None,
                        nodes: budget.nodes,
                        hit_time_limit: false,
                    };
                };
                let raw = sign * best;
                objective_values.push(raw + constant);
                push_rows(&mut base_rows, terms, Relation::Eq, raw);
            }
        }
    }
    SearchOutcome {
        status: SearchStatus::Optimal,
        objective_values,
        values: incumbent.map(|(_, v)| VarAssignment::from_bools(v.iter().map(|&x| x == 1).collect())),
        nodes: budget.nodes,
        hit_time_limit: false,
    }
}
