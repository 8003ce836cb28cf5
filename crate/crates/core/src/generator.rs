//! Synthetic instances calibrated to published ward statistics.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::combinatorics::{check_feasibility, construct_room_split, feasible_general, Census, RoomSplit};
use crate::instance::{Instance, Patient, Period, PreAssignment, Sex, Ward};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GeneratorError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub n_rooms: usize,
    /// Capacity to fraction of rooms; fractions are normalised.
    pub capacity_mix: BTreeMap<u32, f64>,
    pub days: Period,
    pub mean_daily_arrivals: f64,
    pub median_los: u32,
    pub private_fraction: f64,
    pub emergency_fraction: f64,
    pub female_fraction: f64,
    pub median_lead_time: u32,
    /// Days simulated before period 1 to seed carried-over patients.
    pub warmup_days: u32,
    pub seed: u64,
}

impl Default for GeneratorParams {
    /// Ward "IM11": 1375 patients a year, 494 women, 235 private,
    /// 296 emergencies, 18 rooms, median stay and lead time 3.
    fn default() -> Self {
        GeneratorParams {
            n_rooms: 18,
            capacity_mix: BTreeMap::from([(1, 0.15), (2, 0.85)]),
            days: 365,
            mean_daily_arrivals: 1375.0 / 365.0,
            median_los: 3,
            private_fraction: 235.0 / 1375.0,
            emergency_fraction: 296.0 / 1375.0,
            female_fraction: 494.0 / 1375.0,
            median_lead_time: 3,
            warmup_days: 30,
            seed: 0,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: String| Err(GeneratorError::InvalidParams(m));
        if self.n_rooms == 0 {
            return bad("n_rooms must be positive".into());
        }
        if self.days == 0 {
            return bad("days must be positive".into());
        }
        if self.capacity_mix.is_empty() || self.capacity_mix.keys().any(|&c| c == 0) {
            return bad("capacity_mix needs positive capacities".into());
        }
        if self.capacity_mix.values().any(|&f| !(f.is_finite() && f >= 0.0)) || self.capacity_mix.values().sum::<f64>() <= 0.0
        {
            return bad("capacity_mix fractions must be non-negative with a positive sum".into());
        }
        if !(self.mean_daily_arrivals.is_finite() && self.mean_daily_arrivals >= 0.0) {
            return bad("mean_daily_arrivals must be a non-negative rate".into());
        }
        if self.median_los == 0 {
            return bad("median_los must be at least 1".into());
        }
        for (name, v) in [
            ("private_fraction", self.private_fraction),
            ("emergency_fraction", self.emergency_fraction),
            ("female_fraction", self.female_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        Ok(())
    }

    /// Room capacities by largest remainder over the mix, smallest first.
    pub fn capacities(&self) -> Vec<u32> {
        let sum: f64 = self.capacity_mix.values().sum();
        let quotas: Vec<(u32, f64)> = self
            .capacity_mix
            .iter()
            .map(|(&c, &f)| (c, f / sum * self.n_rooms as f64))
            .collect();
        let mut counts: Vec<usize> = quotas.iter().map(|(_, q)| q.floor() as usize).collect();
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a].1 - quotas[a].1.floor();
            let rb = quotas[b].1 - quotas[b].1.floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let missing = self.n_rooms - counts.iter().sum::<usize>();
        for &i in order.iter().cycle().take(missing) {
            counts[i] += 1;
        }
        quotas
            .iter()
            .zip(counts)
            .flat_map(|(&(c, _), n)| std::iter::repeat_n(c, n))
            .collect()
    }
}

/// Geometric on `{offset, offset + 1, ...}` whose median is `median`.
fn geometric_with_median(median: u32, offset: u32) -> Geometric {
    let steps = (median + 1 - offset) as f64;
    Geometric::new(1.0 - 0.5f64.powf(1.0 / steps)).expect("probability in (0, 1]")
}

struct Draw {
    sex: Sex,
    private: bool,
    emergency: bool,
    los: u32,
    lead: u32,
}

fn split_for(census: &Census) -> Option<RoomSplit> {
    construct_room_split(census)
        .ok()
        .filter(|s| s.satisfies(&census.capacities, census.female, census.male))
        .or_else(|| feasible_general(census.female, census.male, &census.capacities).witness)
}

pub fn generate(params: &GeneratorParams) -> Result<Instance, GeneratorError> {
    params.validate()?;
    let capacities = params.capacities();
    let ward = Ward::from_capacities(&capacities);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let los_dist = geometric_with_median(params.median_los, 1);
    let lead_dist = geometric_with_median(params.median_lead_time, 0);
    let arrivals = (params.mean_daily_arrivals > 0.0)
        .then(|| Poisson::new(params.mean_daily_arrivals).expect("positive rate"));
    let draw_day = |rng: &mut ChaCha8Rng| -> Vec<Draw> {
        let n = arrivals.as_ref().map_or(0, |d| d.sample(rng) as usize);
        (0..n)
            .map(|_| Draw {
                sex: if rng.gen_bool(params.female_fraction) { Sex::Female } else { Sex::Male },
                private: rng.gen_bool(params.private_fraction),
                emergency: rng.gen_bool(params.emergency_fraction),
                los: 1 + los_dist.sample(rng) as u32,
                lead: lead_dist.sample(rng).min(u32::MAX as u64) as u32,
            })
            .collect()
    };

    // patients admitted during the warm-up who are still in hospital at 1
    let mut carried = Vec::new();
    for back in (0..params.warmup_days).rev() {
        for d in draw_day(&mut rng) {
            // arrival day is -back
            if d.los > back + 1 {
                carried.push((d.sex, d.private, d.los - back));
            }
        }
    }
    let mut patients = Vec::new();
    for day in 1..=params.days {
        for d in draw_day(&mut rng) {
            let registration = if d.emergency { day } else { day.saturating_sub(d.lead) };
            patients.push((registration, day, day + d.los, d.sex, d.private));
        }
    }

    let pre_rooms = loop {
        let female = carried.iter().filter(|c| c.0 == Sex::Female).count() as u32;
        let male = carried.len() as u32 - female;
        let census = Census::new(female, male, 0, 0, capacities.clone()).expect("counts are consistent");
        if check_feasibility(&census).feasible {
            if let Some(split) = split_for(&census) {
                break place_carried(&carried, &split, &capacities);
            }
        }
        carried.pop();
    };

    let mut all = Vec::with_capacity(carried.len() + patients.len());
    let mut pre_assignments = Vec::new();
    for (i, (&(sex, private, discharge), room)) in carried.iter().zip(pre_rooms).enumerate() {
        let id = format!("c{:04}", i + 1);
        pre_assignments.push(PreAssignment {
            patient: id.clone(),
            room: ward.rooms[room].id.clone(),
        });
        all.push(Patient {
            id,
            sex,
            registration: 0,
            arrival: 0,
            discharge,
            private,
        });
    }
    for (i, (registration, arrival, discharge, sex, private)) in patients.into_iter().enumerate() {
        all.push(Patient {
            id: format!("p{:05}", i + 1),
            sex,
            registration,
            arrival,
            discharge,
            private,
        });
    }
    Ok(Instance::new(ward, params.days, all, pre_assignments, vec![]).expect("generated instances are valid"))
}

/// Private patients take a fresh room of their side's rooms where one is
/// left, everyone else fills beds in room order.
fn place_carried(carried: &[(Sex, bool, Period)], split: &RoomSplit, capacities: &[u32]) -> Vec<usize> {
    let mut free: Vec<u32> = capacities.to_vec();
    let mut rooms = vec![usize::MAX; carried.len()];
    for pass_private in [true, false] {
        for (i, &(sex, private, _)) in carried.iter().enumerate() {
            if private != pass_private {
                continue;
            }
            let side = if sex == Sex::Female { &split.female_rooms } else { &split.male_rooms };
            let fresh = side.iter().copied().find(|&r| free[r] == capacities[r] && pass_private);
            let room = fresh
                .or_else(|| side.iter().copied().find(|&r| free[r] > 0))
                .expect("the split has enough beds");
            free[room] -= 1;
            rooms[i] = room;
        }
    }
    rooms
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::validate_assignment;
    use crate::instance::{census, load_instance, instance_to_json};

    #[test]
    fn default_capacities() {
        let caps = GeneratorParams::default().capacities();
        assert_eq!(caps.len(), 18);
        assert_eq!(caps.iter().filter(|&&c| c == 1).count(), 3);
    }

    #[test]
    fn deterministic_and_valid() {
        let p = GeneratorParams {
            days: 60,
            seed: 7,
            ..Default::default()
        };
        let a = generate(&p).unwrap();
        assert_eq!(a, generate(&p).unwrap());
        assert_eq!(load_instance(&instance_to_json(&a)).unwrap(), a);
        assert_ne!(a, generate(&GeneratorParams { seed: 8, ..p }).unwrap());
    }

    #[test]
    fn carried_patients_fit_on_day_one() {
        for seed in 0..10 {
            let inst = generate(&GeneratorParams {
                days: 5,
                seed,
                ..Default::default()
            })
            .unwrap();
            let carried: Vec<&Patient> = inst.patients.iter().filter(|p| p.arrival == 0).collect();
            assert_eq!(carried.len(), inst.pre_assignments.len());
            let mut day_one = crate::evaluate::Assignment::new();
            for fix in &inst.pre_assignments {
                day_one.set(fix.patient.clone(), 1, fix.room.clone());
            }
            let sub = Instance::new(
                inst.ward.clone(),
                1,
                carried.into_iter().cloned().collect(),
                inst.pre_assignments.clone(),
                vec![],
            )
            .unwrap();
            assert!(validate_assignment(&sub, &day_one).is_valid(), "seed {seed}");
            assert!(check_feasibility(&census(&sub, 1).unwrap()).feasible);
        }
    }

    #[test]
    fn degenerate_parameters() {
        let empty = generate(&GeneratorParams {
            mean_daily_arrivals: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert!(empty.patients.is_empty());
        let emergencies = generate(&GeneratorParams {
            days: 30,
            emergency_fraction: 1.0,
            ..Default::default()
        })
        .unwrap();
        assert!(emergencies.patients.iter().all(|p| p.registration == p.arrival));
        assert!(generate(&GeneratorParams {
            female_fraction: 1.5,
            ..Default::default()
        })
        .is_err());
    }
}
