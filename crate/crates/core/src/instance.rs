//! Ward, patient and instance types plus the JSON document schema.
//!
//! Periods run `1..=horizon`. An arrival of `0` marks a patient that is
//! already in hospital when the horizon starts; such patients are present
//! from period 1 on. Discharges may lie beyond the horizon, in which case
//! the stay is truncated to `horizon + 1` for all evaluation purposes.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::Census;

pub type Period = u32;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("period {t} outside horizon 1..={horizon}")]
    PeriodOutOfRange { t: Period, horizon: Period },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sex {
    #[serde(rename = "F")]
    Female,
    #[serde(rename = "M")]
    Male,
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sex::Female => write!(f, "F"),
            Sex::Male => write!(f, "M"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub id: String,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ward {
    pub rooms: Vec<RoomSpec>,
}

impl Ward {
    pub fn from_capacities(capacities: &[u32]) -> Self {
        let rooms = capacities
            .iter()
            .enumerate()
            .map(|(i, &capacity)| RoomSpec {
                id: format!("r{}", i + 1),
                capacity,
            })
            .collect();
        Ward { rooms }
    }

    pub fn capacities(&self) -> Vec<u32> {
        self.rooms.iter().map(|r| r.capacity).collect()
    }

    /// Number of rooms per capacity (`R_c`).
    pub fn capacity_histogram(&self) -> BTreeMap<u32, usize> {
        let mut hist = BTreeMap::new();
        for room in &self.rooms {
            *hist.entry(room.capacity).or_insert(0) += 1;
        }
        hist
    }

    pub fn total_capacity(&self) -> u32 {
        self.rooms.iter().map(|r| r.capacity).sum()
    }

    pub fn room_index(&self, id: &str) -> Option<usize> {
        self.rooms.iter().position(|r| r.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patient {
    pub id: String,
    pub sex: Sex,
    pub registration: Period,
    pub arrival: Period,
    pub discharge: Period,
    #[serde(default)]
    pub private: bool,
}

impl Patient {
    /// First period in which the patient needs a bed.
    pub fn first_period(&self) -> Period {
        self.arrival.max(1)
    }

    /// Exclusive end of the in-horizon stay, `min(dis, T + 1)`.
    pub fn stay_end(&self, horizon: Period) -> Period {
        self.discharge.min(horizon + 1)
    }

    /// Periods `max(arr, 1) .. min(dis, T + 1)`.
    pub fn stay(&self, horizon: Period) -> std::ops::Range<Period> {
        self.first_period()..self.stay_end(horizon).max(self.first_period())
    }

    pub fn is_present(&self, t: Period) -> bool {
        self.arrival <= t && t < self.discharge
    }

    pub fn is_emergency(&self) -> bool {
        self.registration == self.arrival
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreAssignment {
    pub patient: String,
    pub room: String,
}

/// A validated problem instance. Construct through [`Instance::new`] or
/// [`load_instance`]; both enforce every structural invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub ward: Ward,
    pub horizon: Period,
    pub patients: Vec<Patient>,
    #[serde(default)]
    pub pre_assignments: Vec<PreAssignment>,
    #[serde(default)]
    pub conflicts: Vec<(String, String)>,
}

impl Instance {
    pub fn new(
        ward: Ward,
        horizon: Period,
        patients: Vec<Patient>,
        pre_assignments: Vec<PreAssignment>,
        conflicts: Vec<(String, String)>,
    ) -> Result<Self, InstanceError> {
        let instance = Instance {
            ward,
            horizon,
            patients,
            pre_assignments,
            conflicts,
        };
        instance.validate()?;
        Ok(instance)
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        let invalid = |msg: String| Err(InstanceError::Invalid(msg));
        if self.horizon < 1 {
            return invalid("horizon must be at least 1".into());
        }
        let mut room_ids = HashSet::new();
        for room in &self.ward.rooms {
            if room.capacity < 1 {
                return invalid(format!("room `{}` has capacity 0", room.id));
            }
            if !room_ids.insert(room.id.as_str()) {
                return invalid(format!("duplicate room id `{}`", room.id));
            }
        }
        let mut patient_ids = HashMap::new();
        for (i, p) in self.patients.iter().enumerate() {
            if patient_ids.insert(p.id.as_str(), i).is_some() {
                return invalid(format!("duplicate patient id `{}`", p.id));
            }
            if p.arrival >= p.discharge {
                return invalid(format!(
                    "patient `{}`: arrival {} must precede discharge {}",
                    p.id, p.arrival, p.discharge
                ));
            }
            if p.registration > p.arrival {
                return invalid(format!(
                    "patient `{}`: registration {} after arrival {}",
                    p.id, p.registration, p.arrival
                ));
            }
            if p.arrival > self.horizon {
                return invalid(format!(
                    "patient `{}`: arrival {} beyond horizon {}",
                    p.id, p.arrival, self.horizon
                ));
            }
            if p.arrival == 0 && p.discharge < 2 {
                return invalid(format!(
                    "patient `{}`: carried-over patient discharged before period 1",
                    p.id
                ));
            }
        }
        let mut pre_assigned = HashSet::new();
        for fix in &self.pre_assignments {
            let Some(&pi) = patient_ids.get(fix.patient.as_str()) else {
                return invalid(format!("pre-assignment references unknown patient `{}`", fix.patient));
            };
            if !room_ids.contains(fix.room.as_str()) {
                return invalid(format!("pre-assignment references unknown room `{}`", fix.room));
            }
            if self.patients[pi].arrival != 0 {
                return invalid(format!(
                    "pre-assigned patient `{}` must have arrival 0",
                    fix.patient
                ));
            }
            if !pre_assigned.insert(fix.patient.as_str()) {
                return invalid(format!("patient `{}` pre-assigned twice", fix.patient));
            }
        }
        for (p, q) in &self.conflicts {
            for id in [p, q] {
                if !patient_ids.contains_key(id.as_str()) {
                    return invalid(format!("conflict references unknown patient `{id}`"));
                }
            }
            if p == q {
                return invalid(format!("patient `{p}` conflicts with itself"));
            }
        }
        Ok(())
    }

    pub fn patient_index(&self, id: &str) -> Option<usize> {
        self.patients.iter().position(|p| p.id == id)
    }

    pub fn patient_lookup(&self) -> HashMap<&str, usize> {
        self.patients
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.as_str(), i))
            .collect()
    }

    pub fn room_lookup(&self) -> HashMap<&str, usize> {
        self.ward
            .rooms
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.as_str(), i))
            .collect()
    }

    /// Pre-assignments as `(patient index, room index)` pairs.
    pub fn pre_assignment_indices(&self) -> Vec<(usize, usize)> {
        let patients = self.patient_lookup();
        let rooms = self.room_lookup();
        self.pre_assignments
            .iter()
            .map(|f| (patients[f.patient.as_str()], rooms[f.room.as_str()]))
            .collect()
    }

    pub fn conflict_indices(&self) -> Vec<(usize, usize)> {
        let patients = self.patient_lookup();
        self.conflicts
            .iter()
            .map(|(p, q)| (patients[p.as_str()], patients[q.as_str()]))
            .collect()
    }

    pub fn periods(&self) -> std::ops::RangeInclusive<Period> {
        1..=self.horizon
    }

    fn check_period(&self, t: Period) -> Result<(), InstanceError> {
        if t < 1 || t > self.horizon {
            Err(InstanceError::PeriodOutOfRange {
                t,
                horizon: self.horizon,
            })
        } else {
            Ok(())
        }
    }

    /// Indices of `P(t) = {p : arr_p <= t < dis_p}`.
    pub fn present_indices(&self, t: Period) -> Vec<usize> {
        self.patients
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_present(t))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn has_private_patients(&self) -> bool {
        self.patients.iter().any(|p| p.private)
    }
}

/// Parses and validates an instance document.
pub fn load_instance(document: &str) -> Result<Instance, InstanceError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let instance: Instance = serde_path_to_error::deserialize(de).map_err(|err| {
        InstanceError::Schema {
            path: err.path().to_string(),
            message: err.inner().to_string(),
        }
    })?;
    instance.validate()?;
    Ok(instance)
}

pub fn instance_to_json(instance: &Instance) -> String {
    serde_json::to_string_pretty(instance).expect("instance serialization cannot fail")
}

/// Patient ids present in period `t`.
pub fn patients_present(instance: &Instance, t: Period) -> Result<Vec<String>, InstanceError> {
    instance.check_period(t)?;
    Ok(instance
        .present_indices(t)
        .into_iter()
        .map(|i| instance.patients[i].id.clone())
        .collect())
}

pub fn census(instance: &Instance, t: Period) -> Result<Census, InstanceError> {
    instance.check_period(t)?;
    let mut census = Census::empty(instance.ward.capacities());
    for p in instance.patients.iter().filter(|p| p.is_present(t)) {
        match p.sex {
            Sex::Female => {
                census.female += 1;
                census.female_private += u32::from(p.private);
            }
            Sex::Male => {
                census.male += 1;
                census.male_private += u32::from(p.private);
            }
        }
    }
    Ok(census)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn patient(id: &str, sex: Sex, arrival: Period, discharge: Period, private: bool) -> Patient {
        Patient {
            id: id.into(),
            sex,
            registration: arrival,
            arrival,
            discharge,
            private,
        }
    }

    /// Two double rooms, three periods, seven patients; one private female
    /// who must be moved once to keep the sexes apart at period 3.
    pub fn two_room_example() -> Instance {
        use Sex::*;
        Instance::new(
            Ward::from_capacities(&[2, 2]),
            3,
            vec![
                patient("a", Male, 1, 2, false),
                patient("b", Male, 1, 2, false),
                patient("c", Female, 1, 3, true),
                patient("d", Female, 1, 4, false),
                patient("e", Female, 2, 4, false),
                patient("f", Male, 3, 4, false),
                patient("g", Male, 3, 4, false),
            ],
            vec![],
            vec![],
        )
        .unwrap()
    }
    /// The depicted solution of [`two_room_example`].
    pub fn example_assignment() -> crate::evaluate::Assignment {
        use crate::evaluate::Assignment;
        let mut a = Assignment::new();
        for (p, t, r) in [
            ("a", 1, "r2"),
            ("b", 1, "r2"),
            ("c", 1, "r1"),
            ("c", 2, "r2"),
            ("d", 1, "r1"),
            ("d", 2, "r1"),
            ("d", 3, "r1"),
            ("e", 2, "r1"),
            ("e", 3, "r1"),
            ("f", 3, "r2"),
            ("g", 3, "r2"),
        ] {
            a.set(p, t, r);
        }
        a
    }
}
