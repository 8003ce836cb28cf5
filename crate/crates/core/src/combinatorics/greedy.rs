//! Period-by-period constructive assignment from room-split witnesses.

use std::collections::HashMap;

use super::{check_feasibility, feasible_general, RoomSplit};
use crate::evaluate::{validate_assignment, Assignment};
use crate::instance::{census, Instance, Sex};

fn witness(instance: &Instance, t: u32) -> Option<RoomSplit> {
    let c = census(instance, t).ok()?;
    let verdict = check_feasibility(&c);
    if !verdict.feasible {
        return None;
    }
    verdict
        .witness
        .filter(|w| w.satisfies(&c.capacities, c.female, c.male))
        .or_else(|| feasible_general(c.female, c.male, &c.capacities).witness)
}

/// Sex of every room: the witness fixes how many rooms of each capacity
/// go to each side, previous occupants decide which ones.
fn align(split: &RoomSplit, capacities: &[u32], previous: &[(u32, u32)]) -> Vec<Option<Sex>> {
    let mut side = vec![None; capacities.len()];
    let mut by_capacity: HashMap<u32, (usize, usize, Vec<usize>)> = HashMap::new();
    for &r in &split.female_rooms {
        by_capacity.entry(capacities[r]).or_default().0 += 1;
    }
    for &r in &split.male_rooms {
        by_capacity.entry(capacities[r]).or_default().1 += 1;
    }
    for (r, &c) in capacities.iter().enumerate() {
        by_capacity.entry(c).or_default().2.push(r);
    }
    for (_, (n_female, n_male, mut rooms)) in by_capacity {
        let lean = |r: usize| previous[r].0 as i64 - previous[r].1 as i64;
        rooms.sort_by_key(|&r| (std::cmp::Reverse(lean(r)), r));
        for &r in &rooms[..n_female] {
            side[r] = Some(Sex::Female);
        }
        let rest = &mut rooms[n_female..];
        rest.sort_by_key(|&r| (std::cmp::Reverse(previous[r].1), r));
        for &r in &rest[..n_male] {
            side[r] = Some(Sex::Male);
        }
        // unused rooms join the side of their last occupants
        for &r in &rest[n_male..] {
            side[r] = Some(if previous[r].0 > 0 { Sex::Female } else { Sex::Male });
        }
    }
    side
}

/// A valid assignment built greedily: patients keep their room when its
/// side allows, private patients get empty rooms where possible.
/// `None` when some period is infeasible or a conflict is violated.
pub fn greedy_assignment(instance: &Instance) -> Option<Assignment> {
    let capacities = instance.ward.capacities();
    let n = capacities.len();
    let mut last_room: Vec<Option<usize>> = vec![None; instance.patients.len()];
    for (p, r) in instance.pre_assignment_indices() {
        last_room[p] = Some(r);
    }
    let mut assignment = Assignment::new();
    let mut previous = vec![(0u32, 0u32); n];
    for (p, r) in instance.pre_assignment_indices() {
        match instance.patients[p].sex {
            Sex::Female => previous[r].0 += 1,
            Sex::Male => previous[r].1 += 1,
        }
    }
    for t in instance.periods() {
        let present = instance.present_indices(t);
        let split = witness(instance, t)?;
        let side = align(&split, &capacities, &previous);
        let mut free = capacities.clone();
        let mut room_of: Vec<Option<usize>> = vec![None; instance.patients.len()];
        let mut has_private = vec![false; n];
        let fits = |r: usize, sex: Sex, free: &[u32]| side[r] == Some(sex) && free[r] > 0;
        for &p in &present {
            if let Some(r) = last_room[p] {
                if fits(r, instance.patients[p].sex, &free) {
                    free[r] -= 1;
                    room_of[p] = Some(r);
                    has_private[r] |= instance.patients[p].private;
                }
            }
        }
        for pass_private in [true, false] {
            for &p in &present {
                let patient = &instance.patients[p];
                if room_of[p].is_some() || patient.private != pass_private {
                    continue;
                }
                let sex = patient.sex;
                let empty = (0..n)
                    .filter(|&r| fits(r, sex, &free) && free[r] == capacities[r])
                    .min_by_key(|&r| (capacities[r], r));
                let shared = (0..n)
                    .filter(|&r| fits(r, sex, &free) && free[r] < capacities[r] && !has_private[r])
                    .min_by_key(|&r| (free[r], r));
                let any = (0..n).find(|&r| fits(r, sex, &free));
                let r = if pass_private { empty.or(any) } else { shared.or(empty).or(any) }?;
                free[r] -= 1;
                room_of[p] = Some(r);
                has_private[r] |= patient.private;
            }
        }
        previous = vec![(0, 0); n];
        for &p in &present {
            let r = room_of[p]?;
            assignment.set(instance.patients[p].id.clone(), t, instance.ward.rooms[r].id.clone());
            last_room[p] = Some(r);
            match instance.patients[p].sex {
                Sex::Female => previous[r].0 += 1,
                Sex::Male => previous[r].1 += 1,
            }
        }
    }
    validate_assignment(instance, &assignment).is_valid().then_some(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::count_transfers;
    use crate::instance::fixtures::two_room_example;

    #[test]
    fn example_is_placed_validly() {
        let inst = two_room_example();
        let a = greedy_assignment(&inst).unwrap();
        assert!(validate_assignment(&inst, &a).is_valid());
        assert!(count_transfers(&inst, &a).unwrap() >= 1);
    }
}
