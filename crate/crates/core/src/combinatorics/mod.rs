//! Per-period combinatorics: feasibility of the sex-separated room split,
//! the maximum number of private patients who can be alone in a room, and
//! exhaustive oracles used to cross-check both and the IP formulations.
//!
//! Every question here is asked for one fixed period and only depends on
//! the [`Census`] of that period: four head counts and the room
//! capacities.

mod exhaustive;
mod greedy;
mod ppp;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

pub use exhaustive::{exhaustive_pra, ExhaustiveCaps, ExhaustiveOutcome, Priority};
pub use greedy::greedy_assignment;
pub use ppp::{
    ppp_bruteforce, s_max_for_census, s_max_frac_period, s_max_period, s_max_total, PppBound, SmaxOptions, SmaxPeriod,
    SmaxProfile, SmaxSource, DEFAULT_PPP_ROOM_CAP,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CombinatoricsError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("census is infeasible")]
    Infeasible,
    #[error("capacities {0:?} not supported by the closed form")]
    UnsupportedCapacities(Vec<u32>),
    #[error("enumeration bound exceeded: {0}")]
    SizeBound(String),
    #[error("invalid census: {0}")]
    InvalidCensus(String),
    #[error("no feasible assignment exists")]
    NoFeasibleAssignment,
    #[error("internal invariant broken: {0}")]
    Internal(String),
}

/// Head counts of one period and the ward's room capacities.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Census {
    pub female: u32,
    pub male: u32,
    pub female_private: u32,
    pub male_private: u32,
    /// One entry per room; room indices in witnesses refer to this order.
    pub capacities: Vec<u32>,
}

impl Census {
    pub fn empty(capacities: Vec<u32>) -> Self {
        Census {
            female: 0,
            male: 0,
            female_private: 0,
            male_private: 0,
            capacities,
        }
    }

    pub fn new(
        female: u32,
        male: u32,
        female_private: u32,
        male_private: u32,
        capacities: Vec<u32>,
    ) -> Result<Self, CombinatoricsError> {
        if female_private > female || male_private > male {
            return Err(CombinatoricsError::InvalidCensus(format!(
                "private counts ({female_private}, {male_private}) exceed totals ({female}, {male})"
            )));
        }
        if capacities.contains(&0) {
            return Err(CombinatoricsError::InvalidCensus("zero room capacity".into()));
        }
        Ok(Census {
            female,
            male,
            female_private,
            male_private,
            capacities,
        })
    }

    pub fn n_rooms(&self) -> usize {
        self.capacities.len()
    }

    pub fn patients(&self) -> u32 {
        self.female + self.male
    }

    pub fn private_patients(&self) -> u32 {
        self.female_private + self.male_private
    }

    pub fn total_capacity(&self) -> u32 {
        self.capacities.iter().sum()
    }

    /// `R_c` for every capacity occurring in the ward.
    pub fn histogram(&self) -> BTreeMap<u32, usize> {
        let mut hist = BTreeMap::new();
        for &c in &self.capacities {
            *hist.entry(c).or_insert(0) += 1;
        }
        hist
    }

    fn count_with(&self, capacity: u32) -> u32 {
        self.capacities.iter().filter(|&&c| c == capacity).count() as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FeasibilityMethod {
    /// All rooms share one capacity.
    DoubleOnly,
    /// Capacities `{1, c}` with enough single rooms.
    SingleAndC,
    /// Capacities `{2, 2c}` with enough double rooms.
    EvenTwoTwoC,
    /// Subset-sum reachability.
    GeneralDP,
}

/// Room indices hosting the female and the male patients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoomSplit {
    pub female_rooms: Vec<usize>,
    pub male_rooms: Vec<usize>,
}

impl RoomSplit {
    fn from_female(n_rooms: usize, female_rooms: Vec<usize>) -> Self {
        let mut is_female = vec![false; n_rooms];
        for &r in &female_rooms {
            is_female[r] = true;
        }
        let male_rooms = (0..n_rooms).filter(|&r| !is_female[r]).collect();
        RoomSplit {
            female_rooms,
            male_rooms,
        }
    }

    /// `sum_{r in S} c_r >= F` and `sum_{r not in S} c_r >= M`.
    pub fn satisfies(&self, capacities: &[u32], female: u32, male: u32) -> bool {
        let cap = |rooms: &[usize]| rooms.iter().map(|&r| capacities[r]).sum::<u32>();
        cap(&self.female_rooms) >= female && cap(&self.male_rooms) >= male
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    pub method: FeasibilityMethod,
    pub witness: Option<RoomSplit>,
}

/// Double-room ward: `ceil(F/2) + ceil(M/2) <= |R|`.
pub fn feasible_double(female: u32, male: u32, n_rooms: u32) -> bool {
    female.div_ceil(2) + male.div_ceil(2) <= n_rooms
}

/// Capacities `{1, c}` with `R_1 >= c - 1`: feasible iff the patients fit
/// into the total number of beds.
pub fn feasible_single_and_c(
    female: u32,
    male: u32,
    singles: u32,
    large: u32,
    c: u32,
) -> Result<bool, CombinatoricsError> {
    if c < 1 {
        return Err(CombinatoricsError::Precondition("capacity c must be positive".into()));
    }
    if singles + 1 < c {
        return Err(CombinatoricsError::Precondition(format!(
            "R1 = {singles} < c - 1 = {}",
            c - 1
        )));
    }
    Ok(female + male <= singles + c * large)
}

/// Capacities `{2, 2c}` with `R_2 >= c - 1`: feasible iff both counts are
/// even and fit, or the patients leave at least one bed free.
pub fn feasible_even(
    female: u32,
    male: u32,
    doubles: u32,
    large: u32,
    c: u32,
) -> Result<bool, CombinatoricsError> {
    if c < 2 {
        return Err(CombinatoricsError::Precondition(format!("multiplier c = {c} < 2")));
    }
    if doubles + 1 < c {
        return Err(CombinatoricsError::Precondition(format!(
            "R2 = {doubles} < c - 1 = {}",
            c - 1
        )));
    }
    let total = 2 * doubles + 2 * c * large;
    let both_even = female.is_multiple_of(2) && male.is_multiple_of(2);
    Ok((both_even && female + male <= total) || female + male < total)
}

/// Exact answer through subset-sum reachability over the room capacities.
pub fn feasible_general(female: u32, male: u32, capacities: &[u32]) -> FeasibilityVerdict {
    let total: u32 = capacities.iter().sum();
    let infeasible = FeasibilityVerdict {
        feasible: false,
        method: FeasibilityMethod::GeneralDP,
        witness: None,
    };
    if female + male > total {
        return infeasible;
    }
    let total = total as usize;
    // reached_by[s]: room whose addition first made sum `s` reachable
    let mut reached_by: Vec<Option<usize>> = vec![None; total + 1];
    let mut reachable = vec![false; total + 1];
    reachable[0] = true;
    for (i, &c) in capacities.iter().enumerate() {
        let c = c as usize;
        for s in (c..=total).rev() {
            if !reachable[s] && reachable[s - c] {
                reachable[s] = true;
                reached_by[s] = Some(i);
            }
        }
    }
    let target = (female as usize..=total - male as usize).find(|&s| reachable[s]);
    let Some(mut s) = target else {
        return infeasible;
    };
    let mut female_rooms = Vec::new();
    while s > 0 {
        let room = reached_by[s].expect("reachable sums have a predecessor");
        female_rooms.push(room);
        s -= capacities[room] as usize;
    }
    female_rooms.sort_unstable();
    FeasibilityVerdict {
        feasible: true,
        method: FeasibilityMethod::GeneralDP,
        witness: Some(RoomSplit::from_female(capacities.len(), female_rooms)),
    }
}

fn distinct_capacities(capacities: &[u32]) -> Vec<u32> {
    let mut d = capacities.to_vec();
    d.sort_unstable();
    d.dedup();
    d
}

/// Cheapest applicable closed form first, subset-sum fallback last.
pub fn check_feasibility(census: &Census) -> FeasibilityVerdict {
    let (f, m) = (census.female, census.male);
    let caps = &census.capacities;
    let distinct = distinct_capacities(caps);
    match distinct.as_slice() {
        [] => FeasibilityVerdict {
            feasible: f == 0 && m == 0,
            method: FeasibilityMethod::DoubleOnly,
            witness: (f == 0 && m == 0).then(|| RoomSplit::from_female(0, vec![])),
        },
        &[c] => {
            let female_rooms = f.div_ceil(c);
            let feasible = female_rooms + m.div_ceil(c) <= caps.len() as u32;
            FeasibilityVerdict {
                feasible,
                method: FeasibilityMethod::DoubleOnly,
                witness: feasible
                    .then(|| RoomSplit::from_female(caps.len(), (0..female_rooms as usize).collect())),
            }
        }
        &[1, c] if census.count_with(1) + 1 >= c => {
            let feasible = feasible_single_and_c(f, m, census.count_with(1), census.count_with(c), c)
                .expect("precondition checked by the guard");
            FeasibilityVerdict {
                feasible,
                method: FeasibilityMethod::SingleAndC,
                witness: if feasible { construct_room_split(census).ok() } else { None },
            }
        }
        &[2, big] if big % 2 == 0 && census.count_with(2) + 1 >= big / 2 => {
            let feasible = feasible_even(f, m, census.count_with(2), census.count_with(big), big / 2)
                .expect("precondition checked by the guard");
            FeasibilityVerdict {
                feasible,
                method: FeasibilityMethod::EvenTwoTwoC,
                witness: None,
            }
        }
        _ => feasible_general(f, m, caps),
    }
}

/// Constructive room split for capacities `{1, c}` with `R_1 >= c - 1`:
/// fill `k = min(floor(F/c), R_c)` large rooms with women and
/// `l = min(floor(M/c), R_c - k)` with men; the remainder either fits into
/// single rooms or the women take one extra large room.
pub fn construct_room_split(census: &Census) -> Result<RoomSplit, CombinatoricsError> {
    let distinct = distinct_capacities(&census.capacities);
    let c = match distinct.as_slice() {
        [] => 1,
        &[c] | &[1, c] => c,
        _ => return Err(CombinatoricsError::UnsupportedCapacities(distinct)),
    };
    let singles = census.count_with(1);
    if c > 1 && singles + 1 < c {
        return Err(CombinatoricsError::Precondition(format!(
            "R1 = {singles} < c - 1 = {}",
            c - 1
        )));
    }
    let (f, m) = (census.female, census.male);
    if f + m > census.total_capacity() {
        return Err(CombinatoricsError::Infeasible);
    }
    let n = census.n_rooms();
    let single_rooms: Vec<usize> = (0..n).filter(|&r| census.capacities[r] == 1).collect();
    if c == 1 {
        return Ok(RoomSplit::from_female(n, single_rooms[..f as usize].to_vec()));
    }
    let large_rooms: Vec<usize> = (0..n).filter(|&r| census.capacities[r] == c).collect();
    let large = large_rooms.len() as u32;
    let k = (f / c).min(large);
    let l = (m / c).min(large - k);
    let rest = (f - c * k) + (m - c * l);
    let female_rooms = if singles >= rest {
        let mut rooms = large_rooms[..k as usize].to_vec();
        rooms.extend_from_slice(&single_rooms[..(f - c * k) as usize]);
        rooms
    } else {
        large_rooms[..(k + 1) as usize].to_vec()
    };
    let split = RoomSplit::from_female(n, female_rooms);
    if !split.satisfies(&census.capacities, f, m) {
        return Err(CombinatoricsError::Internal(format!(
            "constructed split {split:?} violates the feasibility inequality"
        )));
    }
    Ok(split)
}

pub const SWEEP_CSV_HEADER: &str = "female,male,female_private,male_private,capacities,feasible,method";

/// One audit row for census sweeps.
pub fn sweep_csv_row(census: &Census, verdict: &FeasibilityVerdict) -> String {
    let caps: Vec<String> = census.capacities.iter().map(u32::to_string).collect();
    format!(
        "{},{},{},{},{},{},{:?}",
        census.female,
        census.male,
        census.female_private,
        census.male_private,
        caps.join(" "),
        verdict.feasible,
        verdict.method
    )
}
