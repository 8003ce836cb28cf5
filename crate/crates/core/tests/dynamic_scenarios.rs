mod common;

use common::patient;
use pra_core::combinatorics::{exhaustive_pra, ExhaustiveCaps, Priority};
use pra_core::dynamic::{run_dynamic, step, DynamicConfig, DynamicState, Stage};
use pra_core::evaluate::validate_assignment;
use pra_core::instance::{Instance, PreAssignment, Sex, Ward};

fn pre(patient: &str, room: &str) -> PreAssignment {
    PreAssignment {
        patient: patient.into(),
        room: room.into(),
    }
}

#[test]
fn moving_a_carried_patient_frees_a_room() {
    // two women split across the double rooms; the private arrival can only
    // be alone if one of them moves
    let inst = Instance::new(
        Ward::from_capacities(&[2, 2]),
        2,
        vec![
            patient("a", Sex::Female, 0, 3, false),
            patient("b", Sex::Female, 0, 3, false),
            patient("c", Sex::Female, 1, 3, true),
        ],
        vec![pre("a", "r1"), pre("b", "r2")],
        vec![],
    )
    .unwrap();
    let run = run_dynamic(&inst, &DynamicConfig::default()).unwrap();
    assert!(run.completed());
    assert_eq!(run.steps[0].stage, Stage::Pstar);
    assert_eq!(run.steps[0].transfers, 1);
    assert_eq!(run.steps[1].stage, Stage::P);
    let best = exhaustive_pra(&inst, Priority::PrivateFirst, &ExhaustiveCaps::default()).unwrap();
    assert_eq!((run.totals.f_priv, run.totals.f_trans), (best.f_priv, best.f_trans));
    assert_eq!((run.totals.f_priv, run.totals.f_trans), (2, 1));
}

#[test]
fn overfull_day_terminates_the_run() {
    let mut patients = Vec::new();
    for i in 0..3 {
        patients.push(patient(&format!("f{i}"), Sex::Female, 2, 4, false));
        patients.push(patient(&format!("m{i}"), Sex::Male, 2, 4, false));
    }
    patients.push(patient("x", Sex::Female, 1, 2, false));
    let inst = Instance::new(Ward::from_capacities(&[2, 2, 2]), 3, patients, vec![], vec![]).unwrap();
    let run = run_dynamic(&inst, &DynamicConfig::default()).unwrap();
    assert!(!run.completed());
    assert_eq!(run.terminated_at, Some(2));
    assert_eq!(run.steps.len(), 2);
    assert_eq!(run.steps[1].stage, Stage::CombinatorialInfeasible);
    assert!(run.iteration_csv(false).contains(",infeasible,"));
}

#[test]
fn empty_ward_runs_every_period() {
    let inst = Instance::new(Ward::from_capacities(&[1, 2]), 4, vec![], vec![], vec![]).unwrap();
    let run = run_dynamic(&inst, &DynamicConfig::default()).unwrap();
    assert!(run.completed());
    assert_eq!(run.steps.len(), 4);
    assert_eq!((run.totals.f_trans, run.totals.f_priv), (0, 0));
    assert!(run.realized.is_empty());
}

#[test]
fn single_steps_advance_the_state() {
    let inst = common::two_rooms();
    let state = DynamicState::initial(&inst);
    assert_eq!(state.t, 1);
    let (first, next) = step(&inst, &state, &DynamicConfig::default()).unwrap();
    assert_eq!(first.t, 1);
    assert_eq!(next.t, 2);
    // everyone present on day 1 keeps a room
    for id in ["a", "b", "c", "d"] {
        assert!(next.rpold.contains_key(id), "{id}");
    }
    let (second, _) = step(&inst, &next, &DynamicConfig::default()).unwrap();
    assert_eq!(second.t, 2);
    assert!(second.window_end >= 2);
}

#[test]
fn two_room_example_rolls_to_a_valid_schedule() {
    let inst = common::two_rooms();
    let run = run_dynamic(&inst, &DynamicConfig::default()).unwrap();
    assert!(run.completed());
    assert!(validate_assignment(&inst, &run.realized).is_valid());
    // f_priv never beats the single-room bound of 1
    assert!(run.totals.f_priv <= 1);
    assert_eq!(run.totals.s_max, Some(1));
}

#[test]
fn knowing_everything_upfront_matches_one_shot() {
    for seed in [3, 7, 11] {
        let inst = common::full_information(&common::tiny_instance(seed));
        let Ok(best) = exhaustive_pra(&inst, Priority::PrivateFirst, &ExhaustiveCaps::default()) else {
            continue;
        };
        let run = run_dynamic(&inst, &DynamicConfig::default()).unwrap();
        assert!(run.completed());
        assert!(run.totals.f_priv <= best.f_priv, "seed {seed}");
    }
}

#[test]
fn repeated_runs_on_a_generated_ward_agree() {
    let inst = common::ward_instance(10, 25, 5);
    let a = run_dynamic(&inst, &DynamicConfig::default()).unwrap();
    let b = run_dynamic(&inst, &DynamicConfig::default()).unwrap();
    assert_eq!(a.iteration_csv(false), b.iteration_csv(false));
    assert_eq!(a.realized.to_json(), b.realized.to_json());
    assert_eq!(a.totals, b.totals);
}
