//! Maximum number of private patients who can be alone in a room.

use std::collections::HashSet;

use serde::Serialize;

use super::{check_feasibility, Census, CombinatoricsError};
use crate::instance::{census, Instance, Period};

pub const DEFAULT_PPP_ROOM_CAP: usize = 12;

/// Closed-form quantities for a ward of single and double rooms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PppBound {
    /// Rooms left empty after packing the regular patients pairwise.
    pub alpha: i64,
    pub beta_f: u32,
    pub beta_m: u32,
    /// Beds available to private patients, `2 alpha + beta_f + beta_m`.
    pub gamma: i64,
    pub s_max: u32,
    /// Bound of the relaxation that ignores sex separation.
    pub s_max_frac: u32,
}

fn require_single_double(census: &Census) -> Result<(), CombinatoricsError> {
    if census.capacities.iter().any(|&c| c != 1 && c != 2) {
        let mut distinct = census.capacities.clone();
        distinct.sort_unstable();
        distinct.dedup();
        return Err(CombinatoricsError::UnsupportedCapacities(distinct));
    }
    if !check_feasibility(census).feasible {
        return Err(CombinatoricsError::Infeasible);
    }
    Ok(())
}

fn frac_bound(census: &Census) -> u32 {
    let free = 2 * census.n_rooms() as i64 - census.patients() as i64;
    (census.private_patients() as i64).min(free).max(0) as u32
}

/// `s_max_t` for capacities within `{1, 2}`. Single rooms are treated as
/// double rooms, which leaves the optimum unchanged on feasible censuses.
pub fn s_max_period(census: &Census) -> Result<PppBound, CombinatoricsError> {
    require_single_double(census)?;
    let regular_f = census.female - census.female_private;
    let regular_m = census.male - census.male_private;
    let alpha = census.n_rooms() as i64 - regular_f.div_ceil(2) as i64 - regular_m.div_ceil(2) as i64;
    if alpha < 0 {
        return Err(CombinatoricsError::Internal(format!(
            "alpha = {alpha} < 0 on a feasible census {census:?}"
        )));
    }
    let beta_f = (regular_f % 2).min(census.female_private);
    let beta_m = (regular_m % 2).min(census.male_private);
    let gamma = 2 * alpha + beta_f as i64 + beta_m as i64;
    let private = census.private_patients() as i64;
    let s_max = if alpha >= private {
        private
    } else if alpha == private - 1 && beta_f == 1 && beta_m == 1 {
        private - 1
    } else {
        gamma - private
    };
    if s_max < 0 {
        return Err(CombinatoricsError::Internal(format!(
            "negative s_max {s_max} for {census:?}"
        )));
    }
    Ok(PppBound {
        alpha,
        beta_f,
        beta_m,
        gamma,
        s_max: s_max as u32,
        s_max_frac: frac_bound(census),
    })
}

/// `min(|P*(t)|, 2|R| - |P(t)|)`, clamped at zero.
pub fn s_max_frac_period(census: &Census) -> Result<u32, CombinatoricsError> {
    require_single_double(census)?;
    Ok(frac_bound(census))
}

/// Partial choice of room roles: beds for regular women, private women
/// alone, beds for regular men, private men alone. Bed counts are clamped
/// at the demand so equivalent states collapse.
type RoleState = (u32, u32, u32, u32);

/// Exact PPP optimum by enumerating, per capacity class, how many rooms
/// go to `S_F`, `S_F*`, `S_M`, `S_M*` (or stay unused).
pub fn ppp_bruteforce(census: &Census, max_rooms: usize) -> Result<u32, CombinatoricsError> {
    if census.n_rooms() > max_rooms {
        return Err(CombinatoricsError::SizeBound(format!(
            "{} rooms > {max_rooms}",
            census.n_rooms()
        )));
    }
    let (f, m) = (census.female, census.male);
    let (fp, mp) = (census.female_private, census.male_private);
    let mut states: HashSet<RoleState> = HashSet::from([(0, 0, 0, 0)]);
    for (&capacity, &count) in &census.histogram() {
        let count = count as u32;
        let mut next = HashSet::new();
        for &(fb, fs, mb, ms) in &states {
            for a in 0..=count {
                for b in 0..=count - a {
                    for d in 0..=count - a - b {
                        for e in 0..=count - a - b - d {
                            let state = (
                                (fb + a * capacity).min(f),
                                (fs + b).min(fp + 1),
                                (mb + d * capacity).min(m),
                                (ms + e).min(mp + 1),
                            );
                            if state.1 <= fp && state.3 <= mp {
                                next.insert(state);
                            }
                        }
                    }
                }
            }
        }
        states = next;
    }
    states
        .into_iter()
        .filter(|&(fb, fs, mb, ms)| fb + fs >= f && mb + ms >= m)
        .map(|(_, fs, _, ms)| fs + ms)
        .max()
        .ok_or(CombinatoricsError::Infeasible)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SmaxSource {
    ClosedForm,
    Bruteforce,
    /// Single-period no-transfer IP solved to optimality.
    IpExact,
    /// Single-period IP stopped at its node limit; the value is achievable
    /// but not proven maximal.
    IpHeuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SmaxPeriod {
    pub t: Period,
    pub value: u32,
    pub source: SmaxSource,
}

impl SmaxPeriod {
    pub fn exact(&self) -> bool {
        self.source != SmaxSource::IpHeuristic
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SmaxProfile {
    pub periods: Vec<SmaxPeriod>,
    pub total: u64,
}

impl SmaxProfile {
    pub fn values(&self) -> Vec<u32> {
        self.periods.iter().map(|p| p.value).collect()
    }

    pub fn exact(&self) -> bool {
        self.periods.iter().all(SmaxPeriod::exact)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmaxOptions {
    pub bruteforce_room_cap: usize,
    /// Node limit for the IP fallback; `None` disables it.
    pub ip_node_limit: Option<u64>,
}

impl Default for SmaxOptions {
    fn default() -> Self {
        SmaxOptions {
            bruteforce_room_cap: DEFAULT_PPP_ROOM_CAP,
            ip_node_limit: Some(1_000_000),
        }
    }
}

/// `s_max_t` of one census: closed form, enumeration, then the IP fallback.
pub fn s_max_for_census(census: &Census, opts: &SmaxOptions) -> Result<(u32, SmaxSource), CombinatoricsError> {
    if census.private_patients() == 0 {
        if !check_feasibility(census).feasible {
            return Err(CombinatoricsError::Infeasible);
        }
        return Ok((0, SmaxSource::ClosedForm));
    }
    match s_max_period(census) {
        Ok(bound) => return Ok((bound.s_max, SmaxSource::ClosedForm)),
        Err(CombinatoricsError::UnsupportedCapacities(_)) => {}
        Err(e) => return Err(e),
    }
    if census.n_rooms() <= opts.bruteforce_room_cap {
        return ppp_bruteforce(census, opts.bruteforce_room_cap).map(|v| (v, SmaxSource::Bruteforce));
    }
    let Some(node_limit) = opts.ip_node_limit else {
        return Err(CombinatoricsError::SizeBound(format!(
            "{} rooms beyond the enumeration cap and no IP fallback",
            census.n_rooms()
        )));
    };
    if !check_feasibility(census).feasible {
        return Err(CombinatoricsError::Infeasible);
    }
    crate::formulations::single_period_private_bound(census, node_limit)
}

/// `s_max = sum_t s_max_t`, an upper bound on `f_priv` whenever every
/// period is exact.
pub fn s_max_total(instance: &Instance, opts: &SmaxOptions) -> Result<SmaxProfile, CombinatoricsError> {
    let mut periods = Vec::with_capacity(instance.horizon as usize);
    for t in instance.periods() {
        let c = census(instance, t).expect("period within horizon");
        let (value, source) = s_max_for_census(&c, opts)?;
        periods.push(SmaxPeriod { t, value, source });
    }
    let total = periods.iter().map(|p| p.value as u64).sum();
    Ok(SmaxProfile { periods, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::two_room_example;

    fn census(f: u32, m: u32, fp: u32, mp: u32, caps: &[u32]) -> Census {
        Census::new(f, m, fp, mp, caps.to_vec()).unwrap()
    }

    #[test]
    fn closed_form_cases() {
        let b = s_max_period(&census(2, 2, 1, 1, &[2, 2, 2, 2])).unwrap();
        assert_eq!((b.alpha, b.s_max), (2, 2));
        assert_eq!(ppp_bruteforce(&census(2, 2, 1, 1, &[2, 2, 2, 2]), 12), Ok(2));

        let b = s_max_period(&census(2, 2, 1, 1, &[2, 2, 2])).unwrap();
        assert_eq!((b.alpha, b.beta_f, b.beta_m, b.s_max), (1, 1, 1, 1));
        assert_eq!(ppp_bruteforce(&census(2, 2, 1, 1, &[2, 2, 2]), 12), Ok(1));

        let b = s_max_period(&census(4, 2, 2, 1, &[2, 2, 2])).unwrap();
        assert_eq!((b.alpha, b.beta_f, b.beta_m, b.s_max), (1, 0, 1, 0));
        assert_eq!(ppp_bruteforce(&census(4, 2, 2, 1, &[2, 2, 2]), 12), Ok(0));
    }

    #[test]
    fn fractional_bound_and_gap() {
        let c = census(2, 2, 1, 1, &[2, 2, 2]);
        assert_eq!(s_max_frac_period(&c), Ok(2));
        assert_eq!(s_max_period(&c).unwrap().s_max, 1);
        assert_eq!(s_max_frac_period(&census(2, 2, 1, 1, &[2, 2, 2, 2])), Ok(2));
        assert_eq!(s_max_frac_period(&census(2, 2, 0, 0, &[2, 2])), Ok(0));
    }

    #[test]
    fn bruteforce_small_cases() {
        assert_eq!(ppp_bruteforce(&census(1, 0, 1, 0, &[1]), 12), Ok(1));
        assert_eq!(
            ppp_bruteforce(&census(1, 1, 1, 1, &[2]), 12),
            Err(CombinatoricsError::Infeasible)
        );
        assert!(matches!(
            ppp_bruteforce(&census(0, 0, 0, 0, &[2; 13]), 12),
            Err(CombinatoricsError::SizeBound(_))
        ));
    }

    #[test]
    fn unsupported_and_infeasible() {
        assert!(matches!(
            s_max_period(&census(1, 0, 1, 0, &[3])),
            Err(CombinatoricsError::UnsupportedCapacities(_))
        ));
        assert_eq!(s_max_period(&census(3, 3, 1, 0, &[2, 2, 2])), Err(CombinatoricsError::Infeasible));
    }

    #[test]
    fn total_over_example() {
        let profile = s_max_total(&two_room_example(), &SmaxOptions::default()).unwrap();
        assert_eq!(profile.values(), vec![0, 1, 0]);
        assert_eq!(profile.total, 1);
        assert!(profile.exact());
    }

    #[test]
    fn larger_capacities_use_bruteforce() {
        let c = census(3, 2, 1, 1, &[1, 3, 3]);
        let (value, source) = s_max_for_census(&c, &SmaxOptions::default()).unwrap();
        assert_eq!(source, SmaxSource::Bruteforce);
        // women share a triple, the private man takes the single and the
        // remaining man the other triple
        assert_eq!(value, 1);
    }
}
