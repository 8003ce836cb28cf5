#![allow(dead_code)]

use pra_core::generator::{generate, GeneratorParams};
use pra_core::instance::{Instance, Patient, Period, PreAssignment, Sex, Ward};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

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

/// Two double rooms over three periods; the optimum moves the private
/// woman once and leaves her alone once.
pub fn two_rooms() -> Instance {
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

/// At most 3 rooms, 6 patients and 4 periods, so the exhaustive oracle
/// applies. About half the carried-over patients are pre-assigned.
pub fn tiny_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_rooms = rng.gen_range(1..=3);
    let caps: Vec<u32> = (0..n_rooms).map(|_| [1, 2, 2, 3][rng.gen_range(0..4)]).collect();
    let horizon = rng.gen_range(1..=4);
    let n_patients = rng.gen_range(1..=6);
    let mut patients = Vec::new();
    let mut pre = Vec::new();
    for i in 0..n_patients {
        let arrival = rng.gen_range(0..=horizon);
        let discharge = rng.gen_range(arrival.max(1) + 1..=horizon + 2);
        let sex = if rng.gen_bool(0.5) { Sex::Female } else { Sex::Male };
        let id = format!("p{i}");
        if arrival == 0 && rng.gen_bool(0.5) {
            pre.push(PreAssignment {
                patient: id.clone(),
                room: format!("r{}", rng.gen_range(1..=n_rooms)),
            });
        }
        patients.push(patient(&id, sex, arrival, discharge, rng.gen_bool(0.35)));
    }
    Instance::new(Ward::from_capacities(&caps), horizon, patients, pre, vec![]).unwrap()
}

/// 90-day instance whose arrival rate scales with the ward size.
pub fn ward_instance(n_rooms: usize, days: Period, seed: u64) -> Instance {
    let base = GeneratorParams::default();
    generate(&GeneratorParams {
        n_rooms,
        days,
        seed,
        mean_daily_arrivals: base.mean_daily_arrivals * n_rooms as f64 / base.n_rooms as f64,
        ..base
    })
    .unwrap()
}

/// The same instance with every patient known from the start.
pub fn full_information(instance: &Instance) -> Instance {
    let mut i = instance.clone();
    for p in &mut i.patients {
        p.registration = 0;
    }
    i.validate().unwrap();
    i
}
