//! Exhaustive search over complete assignments of tiny instances.

use serde::Serialize;

use super::CombinatoricsError;
use crate::evaluate::Assignment;
use crate::instance::{Instance, Period, Sex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Priority {
    /// Minimise transfers, then maximise single-room days.
    TransfersFirst,
    /// Maximise single-room days, then minimise transfers.
    PrivateFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExhaustiveCaps {
    pub max_patients: usize,
    pub max_rooms: usize,
    pub max_horizon: Period,
    /// Only consider assignments that keep every patient in one room and
    /// honour the pre-assignments.
    pub no_transfers: bool,
}

impl Default for ExhaustiveCaps {
    fn default() -> Self {
        ExhaustiveCaps {
            max_patients: 6,
            max_rooms: 3,
            max_horizon: 4,
            no_transfers: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExhaustiveOutcome {
    pub f_trans: u64,
    pub f_priv: u64,
    pub assignment: Assignment,
}

#[derive(Clone, Copy)]
struct Slot {
    patient: usize,
    t: Period,
}

struct Search<'a> {
    instance: &'a Instance,
    priority: Priority,
    no_transfers: bool,
    slots: Vec<Slot>,
    capacities: Vec<u32>,
    /// `pre[p]` is the pre-assigned room of patient `p`.
    pre: Vec<Option<usize>>,
    conflicts: Vec<Vec<usize>>,
    /// Private slots in periods `t..=T`, indexed by `t`.
    private_from: Vec<u64>,
    room_of: Vec<Vec<Option<usize>>>,
    occupancy: Vec<Vec<u32>>,
    sex_in: Vec<Vec<Option<Sex>>>,
    trans: u64,
    priv_days: u64,
    best: Option<(u64, u64, Vec<Vec<Option<usize>>>)>,
}

impl Search<'_> {
    fn key(&self, trans: u64, priv_days: u64) -> (i64, i64) {
        match self.priority {
            Priority::TransfersFirst => (-(trans as i64), priv_days as i64),
            Priority::PrivateFirst => (priv_days as i64, -(trans as i64)),
        }
    }

    fn can_improve(&self, k: usize) -> bool {
        let Some((bt, bp, _)) = &self.best else {
            return true;
        };
        let t = if k < self.slots.len() {
            self.slots[k].t as usize
        } else {
            self.private_from.len() - 1
        };
        let priv_ub = self.priv_days + self.private_from[t];
        self.key(self.trans, priv_ub) > self.key(*bt, *bp)
    }

    fn period_single_days(&self, t: Period) -> u64 {
        let ti = t as usize;
        self.instance
            .present_indices(t)
            .into_iter()
            .filter(|&p| self.instance.patients[p].private)
            .filter(|&p| {
                let r = self.room_of[p][ti].expect("period complete");
                self.occupancy[r][ti] == 1
            })
            .count() as u64
    }

    fn dfs(&mut self, k: usize) {
        let mut gained = 0;
        if k > 0 && (k == self.slots.len() || self.slots[k].t != self.slots[k - 1].t) {
            gained = self.period_single_days(self.slots[k - 1].t);
        }
        self.priv_days += gained;
        if k == self.slots.len() {
            let better = match &self.best {
                None => true,
                Some((bt, bp, _)) => self.key(self.trans, self.priv_days) > self.key(*bt, *bp),
            };
            if better {
                self.best = Some((self.trans, self.priv_days, self.room_of.clone()));
            }
        } else if self.can_improve(k) {
            self.branch(k);
        }
        self.priv_days -= gained;
    }

    fn branch(&mut self, k: usize) {
        let Slot { patient: p, t } = self.slots[k];
        let ti = t as usize;
        let patient = &self.instance.patients[p];
        let first = patient.first_period();
        let prev = if t > first { self.room_of[p][ti - 1] } else { None };
        for r in 0..self.capacities.len() {
            if self.no_transfers {
                if prev.is_some_and(|q| q != r) {
                    continue;
                }
                if t == 1 && self.pre[p].is_some_and(|q| q != r) {
                    continue;
                }
            }
            if self.occupancy[r][ti] >= self.capacities[r] {
                continue;
            }
            if self.sex_in[r][ti].is_some_and(|s| s != patient.sex) {
                continue;
            }
            if self.conflicts[p].iter().any(|&q| self.room_of[q][ti] == Some(r)) {
                continue;
            }
            let cost = match prev {
                Some(q) => u64::from(q != r),
                None => u64::from(t == 1 && self.pre[p].is_some_and(|q| q != r)),
            };
            let old_sex = self.sex_in[r][ti];
            self.room_of[p][ti] = Some(r);
            self.occupancy[r][ti] += 1;
            self.sex_in[r][ti] = Some(patient.sex);
            self.trans += cost;
            self.dfs(k + 1);
            self.trans -= cost;
            self.sex_in[r][ti] = old_sex;
            self.occupancy[r][ti] -= 1;
            self.room_of[p][ti] = None;
        }
    }
}

/// Lexicographic optimum over every complete assignment satisfying
/// capacities, sex separation and conflicts. Rooms are tried in ward order
/// and patients period by period in instance order; among equal optima the
/// first one found is returned.
pub fn exhaustive_pra(
    instance: &Instance,
    priority: Priority,
    caps: &ExhaustiveCaps,
) -> Result<ExhaustiveOutcome, CombinatoricsError> {
    if instance.patients.len() > caps.max_patients
        || instance.ward.rooms.len() > caps.max_rooms
        || instance.horizon > caps.max_horizon
    {
        return Err(CombinatoricsError::SizeBound(format!(
            "{} patients, {} rooms, T = {} exceed caps {caps:?}",
            instance.patients.len(),
            instance.ward.rooms.len(),
            instance.horizon
        )));
    }
    let n = instance.patients.len();
    let horizon = instance.horizon;
    let mut slots = Vec::new();
    for t in instance.periods() {
        for p in instance.present_indices(t) {
            slots.push(Slot { patient: p, t });
        }
    }
    let mut pre = vec![None; n];
    for (p, r) in instance.pre_assignment_indices() {
        pre[p] = Some(r);
    }
    let mut conflicts = vec![Vec::new(); n];
    for (p, q) in instance.conflict_indices() {
        conflicts[p].push(q);
        conflicts[q].push(p);
    }
    let mut private_from = vec![0u64; horizon as usize + 2];
    for t in (1..=horizon).rev() {
        let here = instance
            .present_indices(t)
            .into_iter()
            .filter(|&p| instance.patients[p].private)
            .count() as u64;
        private_from[t as usize] = private_from[t as usize + 1] + here;
    }
    let rooms = instance.ward.rooms.len();
    let mut search = Search {
        instance,
        priority,
        no_transfers: caps.no_transfers,
        slots,
        capacities: instance.ward.capacities(),
        pre,
        conflicts,
        private_from,
        room_of: vec![vec![None; horizon as usize + 1]; n],
        occupancy: vec![vec![0; horizon as usize + 1]; rooms],
        sex_in: vec![vec![None; horizon as usize + 1]; rooms],
        trans: 0,
        priv_days: 0,
        best: None,
    };
    search.dfs(0);
    let (f_trans, f_priv, room_of) = search.best.ok_or(CombinatoricsError::NoFeasibleAssignment)?;
    let mut assignment = Assignment::new();
    for (p, periods) in room_of.iter().enumerate() {
        for (t, r) in periods.iter().enumerate() {
            if let Some(r) = r {
                assignment.set(
                    instance.patients[p].id.clone(),
                    t as Period,
                    instance.ward.rooms[*r].id.clone(),
                );
            }
        }
    }
    Ok(ExhaustiveOutcome {
        f_trans,
        f_priv,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::{count_private_single_days, count_transfers, validate_assignment};
    use crate::instance::fixtures::{patient, two_room_example};
    use crate::instance::{PreAssignment, Ward};

    fn caps() -> ExhaustiveCaps {
        ExhaustiveCaps {
            max_patients: 7,
            ..ExhaustiveCaps::default()
        }
    }

    #[test]
    fn two_room_example_optimum() {
        let inst = two_room_example();
        for priority in [Priority::TransfersFirst, Priority::PrivateFirst] {
            let out = exhaustive_pra(&inst, priority, &caps()).unwrap();
            assert_eq!((out.f_trans, out.f_priv), (1, 1));
            assert!(validate_assignment(&inst, &out.assignment).is_valid());
            assert_eq!(count_transfers(&inst, &out.assignment).unwrap(), 1);
            assert_eq!(count_private_single_days(&inst, &out.assignment).unwrap(), 1);
        }
        let fixed = ExhaustiveCaps {
            no_transfers: true,
            ..caps()
        };
        assert_eq!(
            exhaustive_pra(&inst, Priority::PrivateFirst, &fixed),
            Err(CombinatoricsError::NoFeasibleAssignment)
        );
    }

    #[test]
    fn single_patient() {
        for private in [false, true] {
            let inst = Instance::new(
                Ward::from_capacities(&[1]),
                2,
                vec![patient("p", Sex::Female, 1, 3, private)],
                vec![],
                vec![],
            )
            .unwrap();
            let out = exhaustive_pra(&inst, Priority::TransfersFirst, &caps()).unwrap();
            assert_eq!((out.f_trans, out.f_priv), (0, 2 * u64::from(private)));
        }
    }

    #[test]
    fn private_woman_beside_two_men() {
        let inst = Instance::new(
            Ward::from_capacities(&[2, 2]),
            2,
            vec![
                patient("f", Sex::Female, 1, 3, true),
                patient("m1", Sex::Male, 1, 2, false),
                patient("m2", Sex::Male, 1, 2, false),
            ],
            vec![],
            vec![],
        )
        .unwrap();
        let out = exhaustive_pra(&inst, Priority::TransfersFirst, &caps()).unwrap();
        assert_eq!((out.f_trans, out.f_priv), (0, 2));
    }

    #[test]
    fn moved_pre_assignment_costs_one() {
        let inst = Instance::new(
            Ward::from_capacities(&[1, 2]),
            1,
            vec![
                patient("a", Sex::Female, 0, 2, false),
                patient("b", Sex::Male, 1, 2, false),
                patient("c", Sex::Male, 1, 2, false),
            ],
            vec![PreAssignment {
                patient: "a".into(),
                room: "r2".into(),
            }],
            vec![],
        )
        .unwrap();
        let out = exhaustive_pra(&inst, Priority::TransfersFirst, &caps()).unwrap();
        assert_eq!(out.f_trans, 1);
        assert_eq!(out.assignment.get("a", 1), Some("r1"));
    }

    #[test]
    fn caps_enforced() {
        let inst = Instance::new(Ward::from_capacities(&[2; 4]), 1, vec![], vec![], vec![]).unwrap();
        assert!(matches!(
            exhaustive_pra(&inst, Priority::TransfersFirst, &ExhaustiveCaps::default()),
            Err(CombinatoricsError::SizeBound(_))
        ));
    }
}
