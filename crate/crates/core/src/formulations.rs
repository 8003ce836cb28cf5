//! Integer programs for PRA and their solutions.
//!
//! Per-period variants (A to K) use `x_prt` and count transfers with
//! `d_prt`; stay-level variants (M to Pstar) use one `x_pr` per patient
//! and therefore never move a patient within the planning horizon.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::combinatorics::{
    s_max_total, Census, CombinatoricsError, SmaxOptions, SmaxProfile, SmaxSource,
};
use crate::evaluate::{count_private_single_days, count_transfers, validate_assignment, Assignment, Violation};
use crate::instance::{Instance, Patient, Period, Sex, Ward};
use crate::model::{
    bruteforce_solve, sanitize, BipModel, LinearExpr, ModelError, Relation, SearchLimits, SearchStatus, Sense,
    VarAssignment, VarTag,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum VariantId {
    A,
    B,
    C,
    D,
    E,
    F,
    H,
    I,
    K,
    M,
    N,
    O,
    P,
    Ostar,
    Pstar,
}

impl VariantId {
    pub const ALL: [VariantId; 15] = [
        VariantId::A,
        VariantId::B,
        VariantId::C,
        VariantId::D,
        VariantId::E,
        VariantId::F,
        VariantId::H,
        VariantId::I,
        VariantId::K,
        VariantId::M,
        VariantId::N,
        VariantId::O,
        VariantId::P,
        VariantId::Ostar,
        VariantId::Pstar,
    ];

    /// Variables `x_pr` instead of `x_prt`.
    pub fn stay_level(self) -> bool {
        use VariantId::*;
        matches!(self, M | N | O | P | Ostar | Pstar)
    }

    /// Variables `s_prt` and single-room constraints.
    pub fn has_singles(self) -> bool {
        !matches!(self, VariantId::A | VariantId::B | VariantId::C | VariantId::D)
    }

    pub fn needs_smax(self) -> bool {
        matches!(self, VariantId::K | VariantId::P | VariantId::Pstar)
    }

    /// Pre-assignments hard-fixed through `x_pr = 1`.
    pub fn fixes_pre_assignments(self) -> bool {
        matches!(self, VariantId::M | VariantId::N | VariantId::O | VariantId::P)
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for VariantId {
    type Err = FormulationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VariantId::ALL
            .iter()
            .copied()
            .find(|v| v.to_string() == s)
            .ok_or_else(|| FormulationError::UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct VariantOptions {
    pub with_conflicts: bool,
    pub with_objective_cuts: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Variant {
    pub id: VariantId,
    pub options: VariantOptions,
}

impl Variant {
    pub fn plain(id: VariantId) -> Self {
        Variant {
            id,
            options: VariantOptions::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("unknown variant {0}")]
    UnknownVariant(String),
    #[error("variant {0} needs s_max: {1}")]
    MissingSmax(VariantId, String),
    #[error("objective cuts need exact s_max; period {0} is heuristic")]
    InexactSmax(Period),
    #[error("variant {0} has no single-room variables")]
    MissingSingleVars(VariantId),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("extraction failed: {0}")]
    Extraction(String),
    #[error("{objective}: model expression gives {model}, recount gives {recount}")]
    ObjectiveMismatch {
        objective: &'static str,
        model: i64,
        recount: u64,
    },
}

/// Objective expressions shared by the variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ObjectiveKind {
    Transfers,
    Private,
    Retention,
    Zero,
}

/// A built model together with the bookkeeping needed to read solutions.
#[derive(Debug, Clone)]
pub struct Formulation {
    pub variant: Variant,
    pub model: BipModel,
    /// Objective kinds aligned with `model.objectives`.
    pub stack: Vec<ObjectiveKind>,
    pub f_trans: LinearExpr,
    pub f_priv: LinearExpr,
    pub retention: LinearExpr,
    pub s_max: Option<Vec<u32>>,
    x: HashMap<(usize, usize, Period), usize>,
    x_stay: HashMap<(usize, usize), usize>,
    singles: HashMap<(usize, usize, Period), usize>,
    transfers: HashMap<(usize, usize, Period), usize>,
}

struct Builder<'a> {
    instance: &'a Instance,
    id: VariantId,
    model: BipModel,
    pre: Vec<Option<usize>>,
    room_ids: Vec<String>,
    patient_ids: Vec<String>,
    x: HashMap<(usize, usize, Period), usize>,
    x_stay: HashMap<(usize, usize), usize>,
    g: HashMap<(usize, Period), usize>,
    m: HashMap<(usize, Period), usize>,
    s: HashMap<(usize, usize, Period), usize>,
    d: HashMap<(usize, usize, Period), usize>,
}

impl Builder<'_> {
    fn patient(&self, p: usize) -> &Patient {
        &self.instance.patients[p]
    }

    fn capacity(&self, r: usize) -> i64 {
        self.instance.ward.rooms[r].capacity as i64
    }

    fn rooms(&self) -> std::ops::Range<usize> {
        0..self.instance.ward.rooms.len()
    }

    /// Rooms with the pre-assigned one first, so the search tries it first.
    fn room_order(&self, p: usize) -> Vec<usize> {
        let mut order: Vec<usize> = self.rooms().collect();
        if let Some(r) = self.pre[p] {
            order.retain(|&q| q != r);
            order.insert(0, r);
        }
        order
    }

    fn present(&self, t: Period) -> Vec<usize> {
        self.instance.present_indices(t)
    }

    /// Assignment variable of `p` in `r` at `t`, per period or per stay.
    fn xv(&self, p: usize, r: usize, t: Period) -> usize {
        if self.id.stay_level() {
            self.x_stay[&(p, r)]
        } else {
            self.x[&(p, r, t)]
        }
    }

    fn create_vars(&mut self) -> Result<(), ModelError> {
        let horizon = self.instance.horizon;
        let singles = self.id.has_singles();
        if self.id.stay_level() {
            let mut order: Vec<usize> = (0..self.instance.patients.len()).collect();
            order.sort_by_key(|&p| (self.patient(p).first_period(), p));
            for p in order {
                let private = self.patient(p).private;
                for r in self.room_order(p) {
                    if singles && private {
                        for t in self.patient(p).stay(horizon) {
                            let name = format!("s_{}_{}_{t}", self.patient_ids[p], self.room_ids[r]);
                            let v = self.model.add_var(name, VarTag::SingleRoom { p, r, t })?;
                            self.s.insert((p, r, t), v);
                        }
                    }
                    let name = format!("x_{}_{}", self.patient_ids[p], self.room_ids[r]);
                    let v = self.model.add_var(name, VarTag::AssignPR { p, r })?;
                    self.x_stay.insert((p, r), v);
                }
            }
            for t in self.instance.periods() {
                for r in self.rooms() {
                    let v = self.model.add_var(format!("g_{}_{t}", self.room_ids[r]), VarTag::FemaleRoom { r, t })?;
                    self.g.insert((r, t), v);
                }
            }
            return Ok(());
        }
        let with_m = matches!(self.id, VariantId::A | VariantId::C);
        for t in self.instance.periods() {
            let present = self.present(t);
            for &p in &present {
                let rooms = if t == 1 { self.room_order(p) } else { self.rooms().collect() };
                for r in rooms {
                    if singles && self.patient(p).private {
                        let name = format!("s_{}_{}_{t}", self.patient_ids[p], self.room_ids[r]);
                        let v = self.model.add_var(name, VarTag::SingleRoom { p, r, t })?;
                        self.s.insert((p, r, t), v);
                    }
                    let name = format!("x_{}_{}_{t}", self.patient_ids[p], self.room_ids[r]);
                    let v = self.model.add_var(name, VarTag::AssignPRT { p, r, t })?;
                    self.x.insert((p, r, t), v);
                }
            }
            for r in self.rooms() {
                let v = self.model.add_var(format!("g_{}_{t}", self.room_ids[r]), VarTag::FemaleRoom { r, t })?;
                self.g.insert((r, t), v);
                if with_m {
                    let v = self.model.add_var(format!("m_{}_{t}", self.room_ids[r]), VarTag::MaleRoom { r, t })?;
                    self.m.insert((r, t), v);
                }
            }
            for &p in &present {
                // d_prt for t in [max(arr, 1), dis' - 2]
                if t + 1 < self.patient(p).stay_end(horizon) {
                    for r in self.rooms() {
                        let name = format!("d_{}_{}_{t}", self.patient_ids[p], self.room_ids[r]);
                        let v = self.model.add_var(name, VarTag::Transfer { p, r, t })?;
                        self.d.insert((p, r, t), v);
                    }
                }
            }
        }
        Ok(())
    }

    fn constrain(&mut self, terms: Vec<(i64, usize)>, relation: Relation, rhs: i64, label: String) -> Result<(), ModelError> {
        if terms.is_empty() && relation.holds(0, rhs) {
            return Ok(());
        }
        self.model.add_constraint(terms, relation, rhs, label)
    }

    fn assign_rows(&mut self) -> Result<(), ModelError> {
        if self.id.stay_level() {
            for p in 0..self.instance.patients.len() {
                let terms = self.rooms().map(|r| (1, self.x_stay[&(p, r)])).collect();
                self.constrain(terms, Relation::Eq, 1, format!("assign_{}", self.patient_ids[p]))?;
            }
        } else {
            for t in self.instance.periods() {
                for p in self.present(t) {
                    let terms = self.rooms().map(|r| (1, self.x[&(p, r, t)])).collect();
                    self.constrain(terms, Relation::Eq, 1, format!("assign_{}_{t}", self.patient_ids[p]))?;
                }
            }
        }
        Ok(())
    }

    fn sex_terms(&self, t: Period, r: usize, sex: Sex) -> Vec<(i64, usize)> {
        self.present(t)
            .into_iter()
            .filter(|&p| self.patient(p).sex == sex)
            .map(|p| (1, self.xv(p, r, t)))
            .collect()
    }

    /// Rows indexed by period and room; `rows(t, r)` yields the rows.
    fn per_room_period(
        &mut self,
        mut rows: impl FnMut(&Self, Period, usize) -> Vec<(Vec<(i64, usize)>, Relation, i64, String)>,
    ) -> Result<(), ModelError> {
        for t in self.instance.periods() {
            for r in self.rooms() {
                for (terms, rel, rhs, label) in rows(self, t, r) {
                    self.constrain(terms, rel, rhs, label)?;
                }
            }
        }
        Ok(())
    }

    fn capacity_rows(&mut self) -> Result<(), ModelError> {
        self.per_room_period(|b, t, r| {
            let terms: Vec<_> = b.present(t).into_iter().map(|p| (1, b.xv(p, r, t))).collect();
            vec![(terms, Relation::Le, b.capacity(r), format!("cap_{}_{t}", b.room_ids[r]))]
        })
    }

    /// `x <= g` for women; `x <= m` or `x + g <= 1` for men.
    fn sex_link_rows(&mut self, with_m: bool) -> Result<(), ModelError> {
        self.per_room_period(|b, t, r| {
            let g = b.g[&(r, t)];
            let mut rows = Vec::new();
            for p in b.present(t) {
                let x = b.xv(p, r, t);
                let label = format!("sex_{}_{}_{t}", b.patient_ids[p], b.room_ids[r]);
                match (b.patient(p).sex, with_m) {
                    (Sex::Female, _) => rows.push((vec![(1, x), (-1, g)], Relation::Le, 0, label)),
                    (Sex::Male, true) => rows.push((vec![(1, x), (-1, b.m[&(r, t)])], Relation::Le, 0, label)),
                    (Sex::Male, false) => rows.push((vec![(1, x), (1, g)], Relation::Le, 1, label)),
                }
            }
            rows
        })
    }

    fn gm_rows(&mut self) -> Result<(), ModelError> {
        self.per_room_period(|b, t, r| {
            vec![(
                vec![(1, b.g[&(r, t)]), (1, b.m[&(r, t)])],
                Relation::Le,
                1,
                format!("gm_{}_{t}", b.room_ids[r]),
            )]
        })
    }

    /// Combined capacity and sex rows, optionally with the single-room
    /// terms `(c_r - 1) s_prt`.
    fn capacity_sex_rows(&mut self, with_m: bool, with_singles: bool) -> Result<(), ModelError> {
        self.per_room_period(|b, t, r| {
            let c = b.capacity(r);
            let g = b.g[&(r, t)];
            let mut female = b.sex_terms(t, r, Sex::Female);
            let mut male = b.sex_terms(t, r, Sex::Male);
            if with_singles && c > 1 {
                for p in b.present(t) {
                    if let Some(&s) = b.s.get(&(p, r, t)) {
                        match b.patient(p).sex {
                            Sex::Female => female.push((c - 1, s)),
                            Sex::Male => male.push((c - 1, s)),
                        }
                    }
                }
            }
            female.push((-c, g));
            let mut rows = vec![(female, Relation::Le, 0, format!("capf_{}_{t}", b.room_ids[r]))];
            if with_m {
                male.push((-c, b.m[&(r, t)]));
                rows.push((male, Relation::Le, 0, format!("capm_{}_{t}", b.room_ids[r])));
            } else {
                male.push((c, g));
                rows.push((male, Relation::Le, c, format!("capm_{}_{t}", b.room_ids[r])));
            }
            rows
        })
    }

    fn transfer_rows(&mut self) -> Result<(), ModelError> {
        let mut keys: Vec<_> = self.d.keys().copied().collect();
        keys.sort_unstable();
        for (p, r, t) in keys {
            let terms = vec![(1, self.x[&(p, r, t)]), (-1, self.x[&(p, r, t + 1)]), (-1, self.d[&(p, r, t)])];
            let label = format!("trans_{}_{}_{t}", self.patient_ids[p], self.room_ids[r]);
            self.constrain(terms, Relation::Le, 0, label)?;
        }
        Ok(())
    }

    fn sorted_singles(&self) -> Vec<((usize, usize, Period), usize)> {
        let mut s: Vec<_> = self.s.iter().map(|(&k, &v)| (k, v)).collect();
        s.sort_unstable();
        s
    }

    /// `s_prt <= x`.
    fn single_link_rows(&mut self) -> Result<(), ModelError> {
        for ((p, r, t), s) in self.sorted_singles() {
            let x = self.xv(p, r, t);
            let label = format!("single_{}_{}_{t}", self.patient_ids[p], self.room_ids[r]);
            self.constrain(vec![(1, s), (-1, x)], Relation::Le, 0, label)?;
        }
        Ok(())
    }

    /// `c_r s_prt + sum_{q != p} x_qr(t) <= c_r`.
    fn single_capacity_rows(&mut self) -> Result<(), ModelError> {
        for ((p, r, t), s) in self.sorted_singles() {
            let c = self.capacity(r);
            let mut terms = vec![(c, s)];
            for q in self.present(t) {
                if q != p {
                    terms.push((1, self.xv(q, r, t)));
                }
            }
            let label = format!("alone_{}_{}_{t}", self.patient_ids[p], self.room_ids[r]);
            self.constrain(terms, Relation::Le, c, label)?;
        }
        Ok(())
    }

    fn prefix_rows(&mut self) -> Result<(), ModelError> {
        for (p, r) in self.instance.pre_assignment_indices() {
            let label = format!("prefix_{}", self.patient_ids[p]);
            self.constrain(vec![(1, self.x_stay[&(p, r)])], Relation::Eq, 1, label)?;
        }
        Ok(())
    }

    fn singles_at(&self, t: Period) -> Vec<(i64, usize)> {
        self.sorted_singles()
            .into_iter()
            .filter(|((_, _, u), _)| *u == t)
            .map(|(_, s)| (1, s))
            .collect()
    }

    fn smax_rows(&mut self, s_max: &[u32], relation: Relation, prefix: &str) -> Result<(), ModelError> {
        for t in self.instance.periods() {
            let terms = self.singles_at(t);
            if terms.is_empty() {
                continue;
            }
            let rhs = s_max[t as usize - 1] as i64;
            self.constrain(terms, relation, rhs, format!("{prefix}_{t}"))?;
        }
        Ok(())
    }

    fn conflict_rows(&mut self) -> Result<(), ModelError> {
        let horizon = self.instance.horizon;
        for (p, q) in self.instance.conflict_indices() {
            let (sp, sq) = (self.patient(p).stay(horizon), self.patient(q).stay(horizon));
            let shared: Vec<Period> = sp.filter(|t| sq.contains(t)).collect();
            if shared.is_empty() {
                continue;
            }
            for r in self.rooms() {
                if self.id.stay_level() {
                    let terms = vec![(1, self.x_stay[&(p, r)]), (1, self.x_stay[&(q, r)])];
                    let label = format!("conflict_{}_{}_{}", self.patient_ids[p], self.patient_ids[q], self.room_ids[r]);
                    self.constrain(terms, Relation::Le, 1, label)?;
                } else {
                    for &t in &shared {
                        let terms = vec![(1, self.x[&(p, r, t)]), (1, self.x[&(q, r, t)])];
                        let label = format!(
                            "conflict_{}_{}_{}_{t}",
                            self.patient_ids[p], self.patient_ids[q], self.room_ids[r]
                        );
                        self.constrain(terms, Relation::Le, 1, label)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn transfer_expr(&self) -> LinearExpr {
        let pre = self.instance.pre_assignment_indices();
        let mut e = LinearExpr {
            terms: Vec::new(),
            constant: pre.len() as i64,
        };
        let mut d: Vec<_> = self.d.iter().map(|(&k, &v)| (k, v)).collect();
        d.sort_unstable();
        e.terms.extend(d.into_iter().map(|(_, v)| (1, v)));
        for (p, r) in pre {
            e.terms.push((-1, self.xv(p, r, 1)));
        }
        e
    }

    fn private_expr(&self) -> LinearExpr {
        LinearExpr {
            terms: self.sorted_singles().into_iter().map(|(_, s)| (1, s)).collect(),
            constant: 0,
        }
    }

    fn retention_expr(&self) -> LinearExpr {
        LinearExpr {
            terms: self
                .instance
                .pre_assignment_indices()
                .into_iter()
                .map(|(p, r)| (1, self.xv(p, r, 1)))
                .collect(),
            constant: 0,
        }
    }
}

fn smax_for(instance: &Instance, id: VariantId) -> Result<SmaxProfile, FormulationError> {
    s_max_total(instance, &SmaxOptions::default()).map_err(|e| FormulationError::MissingSmax(id, e.to_string()))
}

/// Builds a variant, computing `s_max` where the variant needs it.
pub fn build(instance: &Instance, variant: Variant) -> Result<Formulation, FormulationError> {
    let needs = variant.id.needs_smax() || (variant.options.with_objective_cuts && instance.has_private_patients());
    let profile = if needs { Some(smax_for(instance, variant.id)?) } else { None };
    build_with_smax(instance, variant, profile.as_ref())
}

/// Builds a variant with a precomputed `s_max` profile.
pub fn build_with_smax(
    instance: &Instance,
    variant: Variant,
    s_max: Option<&SmaxProfile>,
) -> Result<Formulation, FormulationError> {
    use VariantId::*;
    let id = variant.id;
    if id.needs_smax() && s_max.is_none() {
        return Err(FormulationError::MissingSmax(id, "no profile given".into()));
    }
    let mut pre = vec![None; instance.patients.len()];
    for (p, r) in instance.pre_assignment_indices() {
        pre[p] = Some(r);
    }
    let mut b = Builder {
        instance,
        id,
        model: BipModel::new(format!("pra_{id}")),
        pre,
        room_ids: instance.ward.rooms.iter().map(|r| sanitize(&r.id)).collect(),
        patient_ids: instance.patients.iter().map(|p| sanitize(&p.id)).collect(),
        x: HashMap::new(),
        x_stay: HashMap::new(),
        g: HashMap::new(),
        m: HashMap::new(),
        s: HashMap::new(),
        d: HashMap::new(),
    };
    b.create_vars()?;
    b.assign_rows()?;
    match id {
        A => {
            b.capacity_rows()?;
            b.sex_link_rows(true)?;
            b.gm_rows()?;
        }
        B | M => {
            b.capacity_rows()?;
            b.sex_link_rows(false)?;
        }
        C => {
            b.gm_rows()?;
            b.capacity_sex_rows(true, false)?;
        }
        D | E | F | N => b.capacity_sex_rows(false, false)?,
        H | I | K | O | P | Ostar | Pstar => b.capacity_sex_rows(false, true)?,
    }
    if !id.stay_level() {
        b.transfer_rows()?;
    }
    if id.has_singles() {
        b.single_link_rows()?;
        if matches!(id, E | F | M | N) {
            b.single_capacity_rows()?;
        }
    }
    if id.fixes_pre_assignments() {
        b.prefix_rows()?;
    }
    let values = s_max.map(SmaxProfile::values);
    if id.needs_smax() {
        b.smax_rows(values.as_deref().unwrap(), Relation::Ge, "smax")?;
    }
    if variant.options.with_conflicts {
        b.conflict_rows()?;
    }
    if variant.options.with_objective_cuts && instance.has_private_patients() {
        if !id.has_singles() {
            return Err(FormulationError::MissingSingleVars(id));
        }
        let profile = s_max.ok_or_else(|| FormulationError::MissingSmax(id, "objective cuts".into()))?;
        if let Some(p) = profile.periods.iter().find(|p| !p.exact()) {
            return Err(FormulationError::InexactSmax(p.t));
        }
        b.smax_rows(values.as_deref().unwrap(), Relation::Le, "cut")?;
    }

    let f_trans = b.transfer_expr();
    let f_priv = b.private_expr();
    let retention = b.retention_expr();
    let stack = match id {
        A | B | C | D | K => vec![ObjectiveKind::Transfers],
        E | H => vec![ObjectiveKind::Transfers, ObjectiveKind::Private],
        F | I => vec![ObjectiveKind::Private, ObjectiveKind::Transfers],
        M | N | O => vec![ObjectiveKind::Private],
        P => vec![ObjectiveKind::Zero],
        Ostar => vec![ObjectiveKind::Private, ObjectiveKind::Retention],
        Pstar => vec![ObjectiveKind::Retention],
    };
    for kind in &stack {
        let (sense, expr, label) = match kind {
            ObjectiveKind::Transfers => (Sense::Minimize, f_trans.clone(), "f_trans"),
            ObjectiveKind::Private => (Sense::Maximize, f_priv.clone(), "f_priv"),
            ObjectiveKind::Retention => (Sense::Maximize, retention.clone(), "retention"),
            ObjectiveKind::Zero => (Sense::Maximize, LinearExpr::new(), "zero"),
        };
        b.model.add_objective(sense, expr, label)?;
    }
    Ok(Formulation {
        variant,
        model: b.model,
        stack,
        f_trans,
        f_priv,
        retention,
        s_max: values,
        x: b.x,
        x_stay: b.x_stay,
        singles: b.s,
        transfers: b.d,
    })
}

/// Adds `sum_{p, r} s_prt <= s_max_t` for every period with private
/// patients.
pub fn add_objective_cuts(
    formulation: &Formulation,
    instance: &Instance,
    s_max: &SmaxProfile,
) -> Result<Formulation, FormulationError> {
    if !instance.has_private_patients() {
        return Ok(formulation.clone());
    }
    if formulation.singles.is_empty() {
        return Err(FormulationError::MissingSingleVars(formulation.variant.id));
    }
    if let Some(p) = s_max.periods.iter().find(|p| !p.exact()) {
        return Err(FormulationError::InexactSmax(p.t));
    }
    let mut out = formulation.clone();
    for t in instance.periods() {
        let mut terms: Vec<(i64, usize)> = formulation
            .singles
            .iter()
            .filter(|((_, _, u), _)| *u == t)
            .map(|(_, &s)| (1, s))
            .collect();
        if terms.is_empty() {
            continue;
        }
        terms.sort_unstable_by_key(|&(_, v)| v);
        out.model
            .add_constraint(terms, Relation::Le, s_max.periods[t as usize - 1].value as i64, format!("cut_{t}"))?;
    }
    out.variant.options.with_objective_cuts = true;
    Ok(out)
}

/// Adds `x_p + x_q <= 1` per room and shared period (per room only for
/// stay-level variants).
pub fn add_conflict_constraints(formulation: &Formulation, instance: &Instance) -> Result<Formulation, FormulationError> {
    let mut out = formulation.clone();
    let horizon = instance.horizon;
    let rooms = instance.ward.rooms.len();
    for (p, q) in instance.conflict_indices() {
        let (sp, sq) = (instance.patients[p].stay(horizon), instance.patients[q].stay(horizon));
        let shared: Vec<Period> = sp.filter(|t| sq.contains(t)).collect();
        if shared.is_empty() {
            continue;
        }
        for r in 0..rooms {
            if formulation.variant.id.stay_level() {
                let terms = vec![(1, formulation.x_stay[&(p, r)]), (1, formulation.x_stay[&(q, r)])];
                out.model.add_constraint(terms, Relation::Le, 1, format!("conflict_{p}_{q}_{r}"))?;
            } else {
                for &t in &shared {
                    let terms = vec![(1, formulation.x[&(p, r, t)]), (1, formulation.x[&(q, r, t)])];
                    out.model.add_constraint(terms, Relation::Le, 1, format!("conflict_{p}_{q}_{r}_{t}"))?;
                }
            }
        }
    }
    out.variant.options.with_conflicts = true;
    Ok(out)
}

impl Formulation {
    fn room_of(&self, values: &VarAssignment, p: usize, t: Period, rooms: usize) -> Result<usize, FormulationError> {
        let chosen: Vec<usize> = (0..rooms)
            .filter(|&r| {
                let v = if self.variant.id.stay_level() {
                    self.x_stay[&(p, r)]
                } else {
                    self.x[&(p, r, t)]
                };
                values.get(v)
            })
            .collect();
        match chosen.as_slice() {
            [r] => Ok(*r),
            _ => Err(FormulationError::Extraction(format!(
                "patient {p} at period {t} has {} rooms",
                chosen.len()
            ))),
        }
    }

    /// Sets every `d` and `s` variable to its tightest value for the
    /// chosen rooms. Feasibility is kept: lowering `d` to the actual room
    /// changes and raising `s` to actual sole occupancy satisfies every
    /// row these variables appear in.
    pub fn polish(&self, instance: &Instance, values: &VarAssignment) -> VarAssignment {
        let mut out = values.clone();
        let x = |p: usize, r: usize, t: Period| -> bool {
            if self.variant.id.stay_level() {
                values.get(self.x_stay[&(p, r)])
            } else {
                self.x.get(&(p, r, t)).is_some_and(|&v| values.get(v))
            }
        };
        for (&(p, r, t), &d) in &self.transfers {
            out.set(d, x(p, r, t) && !x(p, r, t + 1));
        }
        for (&(p, r, t), &s) in &self.singles {
            let alone = x(p, r, t) && instance.present_indices(t).into_iter().all(|q| q == p || !x(q, r, t));
            out.set(s, alone);
        }
        out
    }

    /// The number of patient-room variables `x_prt` or `x_pr`.
    pub fn assignment_var_count(&self) -> usize {
        self.x.len() + self.x_stay.len()
    }

    pub fn single_var_count(&self) -> usize {
        self.singles.len()
    }

    pub fn transfer_var_count(&self) -> usize {
        self.transfers.len()
    }
}

/// Variable values realising `assignment`: room variables from the
/// placement, sex-room indicators from the occupants, `d` and `s` tight.
/// Fails when the assignment violates a row of the model, for example a
/// room change under a stay-level variant.
pub fn encode_assignment(
    instance: &Instance,
    formulation: &Formulation,
    assignment: &Assignment,
) -> Result<VarAssignment, FormulationError> {
    let rooms = instance.room_lookup();
    let mut values = VarAssignment::zeros(formulation.model.num_vars());
    let mut female: HashSet<(usize, Period)> = HashSet::new();
    let mut male: HashSet<(usize, Period)> = HashSet::new();
    for (p, patient) in instance.patients.iter().enumerate() {
        for t in patient.stay(instance.horizon) {
            let room = assignment
                .get(&patient.id, t)
                .ok_or_else(|| FormulationError::Extraction(format!("`{}` unassigned at {t}", patient.id)))?;
            let &r = rooms
                .get(room)
                .ok_or_else(|| FormulationError::Extraction(format!("unknown room `{room}`")))?;
            if formulation.variant.id.stay_level() {
                values.set(formulation.x_stay[&(p, r)], true);
            } else if let Some(&v) = formulation.x.get(&(p, r, t)) {
                values.set(v, true);
            }
            match patient.sex {
                Sex::Female => female.insert((r, t)),
                Sex::Male => male.insert((r, t)),
            };
        }
    }
    for var in &formulation.model.vars {
        match var.tag {
            VarTag::FemaleRoom { r, t } => values.set(var.index, female.contains(&(r, t))),
            VarTag::MaleRoom { r, t } => values.set(var.index, male.contains(&(r, t))),
            _ => {}
        }
    }
    let values = formulation.polish(instance, &values);
    if let Some(c) = formulation.model.violated_constraints(&values).first() {
        return Err(FormulationError::Extraction(format!("constraint {} violated", c.label)));
    }
    Ok(values)
}

/// Reads `z(p, t)` off a solution and validates it.
pub fn extract_assignment(
    instance: &Instance,
    formulation: &Formulation,
    values: &VarAssignment,
) -> Result<Assignment, FormulationError> {
    if values.len() != formulation.model.num_vars() {
        return Err(FormulationError::Extraction(format!(
            "{} values for {} variables",
            values.len(),
            formulation.model.num_vars()
        )));
    }
    if let Some(c) = formulation.model.violated_constraints(values).first() {
        return Err(FormulationError::Extraction(format!("constraint {} violated", c.label)));
    }
    let rooms = instance.ward.rooms.len();
    let mut a = Assignment::new();
    for (p, patient) in instance.patients.iter().enumerate() {
        for t in patient.stay(instance.horizon) {
            let r = formulation.room_of(values, p, t, rooms)?;
            a.set(patient.id.clone(), t, instance.ward.rooms[r].id.clone());
        }
    }
    let report = validate_assignment(instance, &a);
    let relevant: Vec<&Violation> = report
        .violations
        .iter()
        .filter(|v| formulation.variant.options.with_conflicts || !matches!(v, Violation::ConflictViolated { .. }))
        .collect();
    if let Some(v) = relevant.first() {
        return Err(FormulationError::Extraction(format!("extracted assignment invalid: {v}")));
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ObjectiveValues {
    pub f_trans: u64,
    pub f_priv: u64,
}

/// Objective values from the model expressions, checked against the
/// recount on the extracted assignment. Values should be polished unless
/// they are optimal for the variant's whole stack; `f_priv` is only
/// checked for variants that carry single-room variables.
pub fn evaluate_objectives(
    instance: &Instance,
    formulation: &Formulation,
    values: &VarAssignment,
) -> Result<ObjectiveValues, FormulationError> {
    let a = extract_assignment(instance, formulation, values)?;
    let trans = count_transfers(instance, &a).map_err(|e| FormulationError::Extraction(e.to_string()))?;
    let private = count_private_single_days(instance, &a).map_err(|e| FormulationError::Extraction(e.to_string()))?;
    let model_trans = formulation.f_trans.evaluate(values);
    if model_trans != trans as i64 {
        return Err(FormulationError::ObjectiveMismatch {
            objective: "f_trans",
            model: model_trans,
            recount: trans,
        });
    }
    if formulation.variant.id.has_singles() {
        let model_priv = formulation.f_priv.evaluate(values);
        if model_priv != private as i64 {
            return Err(FormulationError::ObjectiveMismatch {
                objective: "f_priv",
                model: model_priv,
                recount: private,
            });
        }
    }
    Ok(ObjectiveValues {
        f_trans: trans,
        f_priv: private,
    })
}

/// One-period, transfer-free bound for censuses beyond the closed form
/// and the enumeration: variant O on a synthetic single-period instance.
pub(crate) fn single_period_private_bound(
    census: &Census,
    node_limit: u64,
) -> Result<(u32, SmaxSource), CombinatoricsError> {
    let mut patients = Vec::new();
    let groups = [
        (Sex::Female, census.female - census.female_private, false),
        (Sex::Female, census.female_private, true),
        (Sex::Male, census.male - census.male_private, false),
        (Sex::Male, census.male_private, true),
    ];
    for (sex, count, private) in groups {
        for _ in 0..count {
            patients.push(Patient {
                id: format!("p{}", patients.len()),
                sex,
                registration: 1,
                arrival: 1,
                discharge: 2,
                private,
            });
        }
    }
    let instance = Instance::new(Ward::from_capacities(&census.capacities), 1, patients, vec![], vec![])
        .map_err(|e| CombinatoricsError::Internal(e.to_string()))?;
    let f = build_with_smax(&instance, Variant::plain(VariantId::O), None)
        .map_err(|e| CombinatoricsError::Internal(e.to_string()))?;
    let out = bruteforce_solve(
        &f.model,
        &SearchLimits {
            node_limit,
            time_limit: None,
        },
    );
    match (out.status, out.values) {
        (SearchStatus::Optimal, Some(_)) => Ok((out.objective_values[0] as u32, SmaxSource::IpExact)),
        (SearchStatus::NodeLimit, Some(v)) => {
            let polished = f.polish(&instance, &v);
            Ok((f.f_priv.evaluate(&polished) as u32, SmaxSource::IpHeuristic))
        }
        (SearchStatus::NodeLimit, None) => Ok((0, SmaxSource::IpHeuristic)),
        _ => Err(CombinatoricsError::Infeasible),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::{example_assignment, patient, two_room_example};
    use crate::instance::PreAssignment;

    fn solve(f: &Formulation) -> crate::model::SearchOutcome {
        bruteforce_solve(&f.model, &SearchLimits::default())
    }

    #[test]
    fn variable_counts_for_d() {
        let f = build(&two_room_example(), Variant::plain(VariantId::D)).unwrap();
        // x: (4 + 3 + 4) * 2, g: 2 * 3, d: (2 + 4 + 2)
        assert_eq!(f.assignment_var_count(), 22);
        assert_eq!(f.transfer_var_count(), 8);
        assert_eq!(f.model.count_tagged(|t| matches!(t, VarTag::FemaleRoom { .. })), 6);
        assert_eq!(f.model.num_vars(), 36);
        assert_eq!(f.model.count_tagged(|t| matches!(t, VarTag::MaleRoom { .. })), 0);
    }

    #[test]
    fn no_private_patients_no_singles() {
        let inst = Instance::new(
            Ward::from_capacities(&[2]),
            1,
            vec![patient("a", Sex::Male, 1, 2, false)],
            vec![],
            vec![],
        )
        .unwrap();
        let f = build(&inst, Variant::plain(VariantId::H)).unwrap();
        assert_eq!(f.single_var_count(), 0);
        assert!(f.f_priv.terms.is_empty());
    }

    #[test]
    fn example_optimum_for_all_transfer_variants() {
        let inst = two_room_example();
        for id in [VariantId::A, VariantId::B, VariantId::C, VariantId::D, VariantId::K] {
            let f = build(&inst, Variant::plain(id)).unwrap();
            let out = solve(&f);
            assert_eq!(out.status, SearchStatus::Optimal, "{id}");
            assert_eq!(out.objective_values, vec![1], "{id}");
            let values = out.values.unwrap();
            let obj = evaluate_objectives(&inst, &f, &values).unwrap();
            assert_eq!(obj.f_trans, 1);
        }
        for id in [VariantId::E, VariantId::H, VariantId::F, VariantId::I] {
            let f = build(&inst, Variant::plain(id)).unwrap();
            let out = solve(&f);
            assert_eq!(out.objective_values, vec![1, 1], "{id}");
            let obj = evaluate_objectives(&inst, &f, out.values.as_ref().unwrap()).unwrap();
            assert_eq!((obj.f_trans, obj.f_priv), (1, 1));
        }
    }

    #[test]
    fn no_transfer_variants_infeasible_on_example() {
        let inst = two_room_example();
        for id in [VariantId::M, VariantId::N, VariantId::O, VariantId::P] {
            let f = build(&inst, Variant::plain(id)).unwrap();
            assert_eq!(solve(&f).status, SearchStatus::Infeasible, "{id}");
        }
    }

    fn prefixed() -> Instance {
        // a sits in r2 and must leave for the private patient b to be
        // alone at period 1 unless b takes r1
        Instance::new(
            Ward::from_capacities(&[2, 2]),
            2,
            vec![
                patient("a", Sex::Female, 0, 3, false),
                patient("b", Sex::Male, 1, 3, true),
                patient("c", Sex::Female, 1, 2, false),
            ],
            vec![PreAssignment {
                patient: "a".into(),
                room: "r2".into(),
            }],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn pre_assignment_handling_by_family() {
        let inst = prefixed();
        let o = build(&inst, Variant::plain(VariantId::O)).unwrap();
        let out = solve(&o);
        assert_eq!(out.objective_values, vec![2]);
        let a = extract_assignment(&inst, &o, out.values.as_ref().unwrap()).unwrap();
        assert_eq!(a.get("a", 1), Some("r2"));
        assert_eq!(a.get("a", 2), Some("r2"));

        let star = build(&inst, Variant::plain(VariantId::Ostar)).unwrap();
        let out = solve(&star);
        assert_eq!(out.objective_values, vec![2, 1]);

        let d = build(&inst, Variant::plain(VariantId::D)).unwrap();
        assert_eq!(d.f_trans.constant, 1);
        assert_eq!(solve(&d).objective_values, vec![0]);
    }

    #[test]
    fn extraction_of_depicted_assignment() {
        let inst = two_room_example();
        let f = build(&inst, Variant::plain(VariantId::H)).unwrap();
        let target = example_assignment();
        let mut values = VarAssignment::zeros(f.model.num_vars());
        for (p, t, r) in target.iter() {
            let name = format!("x_{p}_{r}_{t}");
            values.set(f.model.var_index(&name).unwrap(), true);
        }
        for t in 1..=3 {
            // r1 female at every period, r2 female only at t = 2
            values.set(f.model.var_index(&format!("g_r1_{t}")).unwrap(), true);
        }
        values.set(f.model.var_index("g_r2_2").unwrap(), true);
        let polished = f.polish(&inst, &values);
        let a = extract_assignment(&inst, &f, &polished).unwrap();
        assert_eq!(a, target);
        let obj = evaluate_objectives(&inst, &f, &polished).unwrap();
        assert_eq!((obj.f_trans, obj.f_priv), (1, 1));
        // unpolished transfer variables leave the transfer row violated
        assert!(extract_assignment(&inst, &f, &values).is_err());
    }

    #[test]
    fn stay_level_solution_is_constant() {
        let inst = Instance::new(
            Ward::from_capacities(&[1, 2]),
            3,
            vec![
                patient("a", Sex::Female, 1, 4, true),
                patient("b", Sex::Male, 2, 4, false),
            ],
            vec![],
            vec![],
        )
        .unwrap();
        let f = build(&inst, Variant::plain(VariantId::O)).unwrap();
        let out = solve(&f);
        assert_eq!(out.objective_values, vec![3]);
        let a = extract_assignment(&inst, &f, out.values.as_ref().unwrap()).unwrap();
        let rooms: Vec<_> = (1..=3).map(|t| a.get("a", t).unwrap().to_string()).collect();
        assert!(rooms.iter().all(|r| r == &rooms[0]));
    }

    #[test]
    fn conflicts() {
        let mut inst = Instance::new(
            Ward::from_capacities(&[2, 2]),
            3,
            vec![
                patient("p", Sex::Female, 1, 3, false),
                patient("q", Sex::Female, 1, 3, false),
                patient("z", Sex::Female, 3, 4, false),
            ],
            vec![],
            vec![],
        )
        .unwrap();
        inst.conflicts = vec![("p".into(), "q".into()), ("p".into(), "z".into())];
        inst.validate().unwrap();
        let conflict_rows = |f: &Formulation| f.model.constraints.iter().filter(|c| c.label.starts_with("conflict")).count();
        let o = build(&inst, Variant::plain(VariantId::O)).unwrap();
        assert_eq!(conflict_rows(&add_conflict_constraints(&o, &inst).unwrap()), 2);
        let h = build(&inst, Variant::plain(VariantId::H)).unwrap();
        assert_eq!(conflict_rows(&add_conflict_constraints(&h, &inst).unwrap()), 4);
        let built = build(
            &inst,
            Variant {
                id: VariantId::H,
                options: VariantOptions {
                    with_conflicts: true,
                    with_objective_cuts: false,
                },
            },
        )
        .unwrap();
        assert_eq!(conflict_rows(&built), 4);
        let out = solve(&built);
        let a = extract_assignment(&inst, &built, out.values.as_ref().unwrap()).unwrap();
        assert_ne!(a.get("p", 1), a.get("q", 1));
    }

    #[test]
    fn objective_cuts() {
        let inst = two_room_example();
        let profile = s_max_total(&inst, &SmaxOptions::default()).unwrap();
        let h = build(&inst, Variant::plain(VariantId::H)).unwrap();
        let cut = add_objective_cuts(&h, &inst, &profile).unwrap();
        // c is present at t = 1, 2 only
        assert_eq!(cut.model.constraints.len(), h.model.constraints.len() + 2);
        assert_eq!(solve(&cut).objective_values, vec![1, 1]);
        let d = build(&inst, Variant::plain(VariantId::D)).unwrap();
        assert!(matches!(
            add_objective_cuts(&d, &inst, &profile),
            Err(FormulationError::MissingSingleVars(VariantId::D))
        ));
    }

    #[test]
    fn coefficient_bound() {
        let inst = Instance::new(
            Ward::from_capacities(&[1, 3]),
            2,
            vec![
                patient("a", Sex::Female, 1, 3, true),
                patient("b", Sex::Male, 1, 2, false),
            ],
            vec![],
            vec![],
        )
        .unwrap();
        for id in VariantId::ALL {
            let f = build(&inst, Variant::plain(id)).unwrap();
            assert!(f.model.max_abs_coefficient() <= 3, "{id}");
        }
    }

    #[test]
    fn variant_names() {
        for id in VariantId::ALL {
            assert_eq!(id.to_string().parse::<VariantId>().unwrap(), id);
        }
        assert!("G".parse::<VariantId>().is_err());
    }

    #[test]
    fn ip_fallback_bound() {
        let c = Census::new(3, 2, 1, 1, vec![1, 3, 3]).unwrap();
        let (v, source) = single_period_private_bound(&c, 1_000_000).unwrap();
        assert_eq!((v, source), (1, SmaxSource::IpExact));
    }
}
