//! Assignments `z(p, t)`, condition checking and the two objectives.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, Period, Sex};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvaluationError {
    #[error("no room assigned to patient `{patient}` in period {t}")]
    Incomplete { patient: String, t: Period },
    #[error("assignment references unknown room `{0}`")]
    UnknownRoom(String),
    #[error("malformed assignment document: {0}")]
    Document(String),
}

/// Room per `(patient id, period)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    entries: BTreeMap<(String, Period), String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentEntry {
    pub patient: String,
    pub period: Period,
    pub room: String,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, patient: impl Into<String>, t: Period, room: impl Into<String>) {
        self.entries.insert((patient.into(), t), room.into());
    }

    pub fn get(&self, patient: &str, t: Period) -> Option<&str> {
        self.entries
            .get(&(patient.to_string(), t))
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Period, &str)> {
        self.entries
            .iter()
            .map(|((p, t), r)| (p.as_str(), *t, r.as_str()))
    }

    /// Copies every entry of `other` into `self`, overwriting on collision.
    pub fn extend_from(&mut self, other: &Assignment) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    /// Applies a consistent room relabelling.
    pub fn relabel(&self, map: &HashMap<String, String>) -> Assignment {
        Assignment {
            entries: self
                .entries
                .iter()
                .map(|(k, r)| (k.clone(), map.get(r).cloned().unwrap_or_else(|| r.clone())))
                .collect(),
        }
    }

    pub fn to_entries(&self) -> Vec<AssignmentEntry> {
        self.iter()
            .map(|(patient, period, room)| AssignmentEntry {
                patient: patient.into(),
                period,
                room: room.into(),
            })
            .collect()
    }

    pub fn from_entries(entries: Vec<AssignmentEntry>) -> Self {
        let mut a = Assignment::new();
        for e in entries {
            a.set(e.patient, e.period, e.room);
        }
        a
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_entries()).expect("assignment serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, EvaluationError> {
        let entries: Vec<AssignmentEntry> =
            serde_json::from_str(text).map_err(|e| EvaluationError::Document(e.to_string()))?;
        Ok(Self::from_entries(entries))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind")]
pub enum Violation {
    CapacityExceeded { room: String, t: Period, occupants: u32, capacity: u32 },
    SexMixed { room: String, t: Period },
    MissingAssignment { patient: String, t: Period },
    UnknownRoom { patient: String, t: Period, room: String },
    /// An entry outside the patient's in-horizon stay or for an unknown patient.
    OutsideStay { patient: String, t: Period },
    ConflictViolated { p: String, q: String, room: String, t: Period },
}

impl Violation {
    fn sort_key(&self) -> (Period, &str, u8, &str) {
        match self {
            Violation::CapacityExceeded { room, t, .. } => (*t, room, 0, ""),
            Violation::SexMixed { room, t } => (*t, room, 1, ""),
            Violation::ConflictViolated { p, room, t, .. } => (*t, room, 2, p),
            Violation::UnknownRoom { patient, t, room } => (*t, room, 3, patient),
            Violation::MissingAssignment { patient, t } => (*t, "", 4, patient),
            Violation::OutsideStay { patient, t } => (*t, "", 5, patient),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CapacityExceeded { room, t, occupants, capacity } => {
                write!(f, "t={t}: room {room} holds {occupants} > {capacity}")
            }
            Violation::SexMixed { room, t } => write!(f, "t={t}: room {room} mixes sexes"),
            Violation::MissingAssignment { patient, t } => {
                write!(f, "t={t}: patient {patient} has no room")
            }
            Violation::UnknownRoom { patient, t, room } => {
                write!(f, "t={t}: patient {patient} placed in unknown room {room}")
            }
            Violation::OutsideStay { patient, t } => {
                write!(f, "t={t}: entry for {patient} outside its stay")
            }
            Violation::ConflictViolated { p, q, room, t } => {
                write!(f, "t={t}: conflicting {p} and {q} share room {room}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks capacity (C), sex separation (S), completeness of the domain and
/// all conflict pairs. Findings are ordered by period, then room id.
pub fn validate_assignment(instance: &Instance, a: &Assignment) -> ValidationReport {
    let rooms = instance.room_lookup();
    let patients = instance.patient_lookup();
    let mut violations = Vec::new();

    for (pid, t, room) in a.iter() {
        match patients.get(pid) {
            Some(&pi) if instance.patients[pi].stay(instance.horizon).contains(&t) => {
                if !rooms.contains_key(room) {
                    violations.push(Violation::UnknownRoom {
                        patient: pid.into(),
                        t,
                        room: room.into(),
                    });
                }
            }
            _ => violations.push(Violation::OutsideStay { patient: pid.into(), t }),
        }
    }

    for t in instance.periods() {
        // occupants per room: (count, has female, has male)
        let mut occupancy: BTreeMap<&str, (u32, bool, bool)> = BTreeMap::new();
        let mut room_of: HashMap<&str, &str> = HashMap::new();
        for p in instance.patients.iter().filter(|p| p.stay(instance.horizon).contains(&t)) {
            match a.get(&p.id, t) {
                None => violations.push(Violation::MissingAssignment { patient: p.id.clone(), t }),
                Some(room) if rooms.contains_key(room) => {
                    let slot = occupancy.entry(room).or_insert((0, false, false));
                    slot.0 += 1;
                    match p.sex {
                        Sex::Female => slot.1 = true,
                        Sex::Male => slot.2 = true,
                    }
                    room_of.insert(p.id.as_str(), room);
                }
                Some(_) => {}
            }
        }
        for (room, (count, female, male)) in occupancy {
            let capacity = instance.ward.rooms[rooms[room]].capacity;
            if count > capacity {
                violations.push(Violation::CapacityExceeded {
                    room: room.into(),
                    t,
                    occupants: count,
                    capacity,
                });
            }
            if female && male {
                violations.push(Violation::SexMixed { room: room.into(), t });
            }
        }
        for (p, q) in &instance.conflicts {
            if let (Some(rp), Some(rq)) = (room_of.get(p.as_str()), room_of.get(q.as_str())) {
                if rp == rq {
                    violations.push(Violation::ConflictViolated {
                        p: p.clone(),
                        q: q.clone(),
                        room: (*rp).into(),
                        t,
                    });
                }
            }
        }
    }

    violations.sort_by(|x, y| x.sort_key().cmp(&y.sort_key()));
    ValidationReport { violations }
}

fn room_at<'a>(a: &'a Assignment, patient: &str, t: Period) -> Result<&'a str, EvaluationError> {
    a.get(patient, t).ok_or_else(|| EvaluationError::Incomplete {
        patient: patient.into(),
        t,
    })
}

/// `f_trans`: room changes between consecutive in-horizon periods plus
/// pre-assignments not honoured in period 1.
pub fn count_transfers(instance: &Instance, a: &Assignment) -> Result<u64, EvaluationError> {
    let mut transfers = 0;
    for p in &instance.patients {
        let stay = p.stay(instance.horizon);
        let mut prev: Option<&str> = None;
        for t in stay {
            let room = room_at(a, &p.id, t)?;
            if prev.is_some_and(|r| r != room) {
                transfers += 1;
            }
            prev = Some(room);
        }
    }
    for fix in &instance.pre_assignments {
        if room_at(a, &fix.patient, 1)? != fix.room {
            transfers += 1;
        }
    }
    Ok(transfers)
}

/// `f_priv`: periods in which a private patient is the sole occupant of
/// their room.
pub fn count_private_single_days(instance: &Instance, a: &Assignment) -> Result<u64, EvaluationError> {
    let mut singles = 0;
    for t in instance.periods() {
        let mut load: HashMap<&str, u32> = HashMap::new();
        let present: Vec<_> = instance
            .patients
            .iter()
            .filter(|p| p.stay(instance.horizon).contains(&t))
            .collect();
        for p in &present {
            *load.entry(room_at(a, &p.id, t)?).or_insert(0) += 1;
        }
        singles += present
            .iter()
            .filter(|p| p.private)
            .filter(|p| load[a.get(&p.id, t).unwrap()] == 1)
            .count() as u64;
    }
    Ok(singles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::*;
    use crate::instance::{PreAssignment, Ward};

    #[test]
    fn example_assignment_is_feasible_with_one_transfer_and_one_single_day() {
        let inst = two_room_example();
        let a = example_assignment();
        assert!(validate_assignment(&inst, &a).is_valid());
        assert_eq!(count_transfers(&inst, &a).unwrap(), 1);
        assert_eq!(count_private_single_days(&inst, &a).unwrap(), 1);
    }

    #[test]
    fn three_in_a_double_room() {
        let inst = Instance::new(
            Ward::from_capacities(&[2, 2]),
            1,
            vec![
                patient("x", Sex::Female, 1, 2, false),
                patient("y", Sex::Female, 1, 2, false),
                patient("z", Sex::Female, 1, 2, false),
            ],
            vec![],
            vec![],
        )
        .unwrap();
        let mut a = Assignment::new();
        for p in ["x", "y", "z"] {
            a.set(p, 1, "r1");
        }
        let report = validate_assignment(&inst, &a);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(report.violations[0], Violation::CapacityExceeded { occupants: 3, .. }));
    }

    #[test]
    fn mixed_room_flagged_once() {
        let inst = Instance::new(
            Ward::from_capacities(&[2]),
            1,
            vec![
                patient("x", Sex::Female, 1, 2, false),
                patient("y", Sex::Male, 1, 2, false),
            ],
            vec![],
            vec![],
        )
        .unwrap();
        let mut a = Assignment::new();
        a.set("x", 1, "r1");
        a.set("y", 1, "r1");
        let report = validate_assignment(&inst, &a);
        assert_eq!(report.violations, vec![Violation::SexMixed { room: "r1".into(), t: 1 }]);
    }

    #[test]
    fn missing_and_outside_entries() {
        let inst = two_room_example();
        let mut a = example_assignment();
        a.set("a", 2, "r1");
        let mut missing = a.clone();
        missing.entries.remove(&("d".to_string(), 2));
        let report = validate_assignment(&inst, &missing);
        assert!(report.violations.contains(&Violation::MissingAssignment { patient: "d".into(), t: 2 }));
        assert!(report.violations.contains(&Violation::OutsideStay { patient: "a".into(), t: 2 }));
        assert!(count_transfers(&inst, &missing).is_err());
        assert!(count_private_single_days(&inst, &missing).is_err());
    }

    #[test]
    fn conflict_pair_sharing_a_room() {
        let mut inst = two_room_example();
        inst.conflicts.push(("d".into(), "e".into()));
        let report = validate_assignment(&inst, &example_assignment());
        assert_eq!(report.violations.len(), 2);
        assert!(report
            .violations
            .iter()
            .all(|v| matches!(v, Violation::ConflictViolated { .. })));
    }

    #[test]
    fn altered_pre_assignment_counts_once() {
        let inst = Instance::new(
            Ward::from_capacities(&[2, 2]),
            3,
            vec![patient("p", Sex::Male, 0, 4, false)],
            vec![PreAssignment { patient: "p".into(), room: "r1".into() }],
            vec![],
        )
        .unwrap();
        let mut a = Assignment::new();
        for t in 1..=3 {
            a.set("p", t, "r2");
        }
        assert_eq!(count_transfers(&inst, &a).unwrap(), 1);
        for t in 1..=3 {
            a.set("p", t, "r1");
        }
        assert_eq!(count_transfers(&inst, &a).unwrap(), 0);
    }

    #[test]
    fn lone_private_patient_counts_each_period() {
        let inst = Instance::new(
            Ward::from_capacities(&[2]),
            3,
            vec![patient("p", Sex::Male, 1, 4, true)],
            vec![],
            vec![],
        )
        .unwrap();
        let mut a = Assignment::new();
        for t in 1..=3 {
            a.set("p", t, "r1");
        }
        assert_eq!(count_private_single_days(&inst, &a).unwrap(), 3);
    }

    #[test]
    fn discharge_beyond_horizon_is_truncated() {
        let inst = Instance::new(
            Ward::from_capacities(&[1]),
            2,
            vec![patient("p", Sex::Male, 1, 9, false)],
            vec![],
            vec![],
        )
        .unwrap();
        let mut a = Assignment::new();
        a.set("p", 1, "r1");
        a.set("p", 2, "r1");
        assert!(validate_assignment(&inst, &a).is_valid());
    }

    #[test]
    fn assignment_document_round_trip() {
        let a = example_assignment();
        assert_eq!(Assignment::from_json(&a.to_json()).unwrap(), a);
    }
}
