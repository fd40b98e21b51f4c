//! Follower control: every member applies its leader's control, so speeds
//! match and gaps stay at their entry value. Also the post-hoc checks that
//! this held in a trace.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coordinator::PlatoonId;
use crate::engine::SimTrace;

/// What a follower receives from its leader, without delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberInfoSet {
    pub p_leader: f64,
    pub v_leader: f64,
    pub u_leader: f64,
}

pub fn follower_control_input(info: &MemberInfoSet) -> f64 {
    info.u_leader
}

/// Worst spacing error for one pair of consecutive members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGap {
    pub platoon: PlatoonId,
    /// Index of the rear member of the pair.
    pub member: u32,
    pub max_error: f64,
    pub at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub tolerance: f64,
    pub max_error: f64,
    pub samples: usize,
    pub pairs: Vec<PairGap>,
    pub pass: bool,
}

/// Compare every consecutive pair of coordinated members against the
/// nominal spacing `delta + l_c` at every step.
pub fn check_intra_platoon_gaps(trace: &SimTrace, delta: f64, l_c: f64, tol: f64) -> GapReport {
    let spacing = delta + l_c;
    let front_of: Vec<Option<u32>> = {
        let ids: BTreeMap<(PlatoonId, u32), u32> =
            trace.vehicles.iter().map(|v| ((v.platoon, v.member), v.id)).collect();
        trace
            .vehicles
            .iter()
            .map(|v| if v.member == 0 { None } else { ids.get(&(v.platoon, v.member - 1)).copied() })
            .collect()
    };
    let mut pos: Vec<Option<f64>> = vec![None; trace.vehicles.len()];
    let mut pairs: BTreeMap<(PlatoonId, u32), PairGap> = BTreeMap::new();
    let mut samples = 0;
    for step in trace.steps() {
        for r in step {
            if r.mode.is_coordinated() {
                pos[r.vehicle as usize] = Some(r.p);
            }
        }
        for r in step.iter().filter(|r| r.mode.is_coordinated()) {
            let Some(front) = front_of[r.vehicle as usize] else { continue };
            let Some(p_front) = pos[front as usize] else { continue };
            let info = trace.vehicle(r.vehicle);
            let err = (p_front - r.p - spacing).abs();
            samples += 1;
            let entry = pairs.entry((info.platoon, info.member)).or_insert(PairGap {
                platoon: info.platoon,
                member: info.member,
                max_error: 0.0,
                at: trace.time(r.step),
            });
            if err > entry.max_error {
                entry.max_error = err;
                entry.at = trace.time(r.step);
            }
        }
        for r in step {
            pos[r.vehicle as usize] = None;
        }
    }
    let pairs: Vec<PairGap> = pairs.into_values().collect();
    let max_error = pairs.iter().map(|p| p.max_error).fold(0.0, f64::max);
    GapReport { tolerance: tol, max_error, samples, pass: max_error <= tol, pairs }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    /// Largest `|u_j - u_{j-1}|` over members and samples.
    pub sup_deviation: f64,
}

/// Sample-wise control equality between consecutive members; `controls[j]`
/// is member `j`'s control on a shared time grid.
pub fn check_string_stability(controls: &[Vec<f64>]) -> StabilityReport {
    let sup_deviation =
        controls.windows(2).flat_map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
    StabilityReport { stable: sup_deviation == 0.0, sup_deviation }
}

/// Per-member control sequences of one platoon over the steps at which
/// every member is under coordinated control.
pub fn platoon_controls(trace: &SimTrace, platoon: PlatoonId) -> Vec<Vec<f64>> {
    let members: Vec<_> = trace.vehicles.iter().filter(|v| v.platoon == platoon).collect();
    let size = members.iter().map(|v| v.member + 1).max().unwrap_or(0) as usize;
    let mut out = vec![Vec::new(); size];
    let mut row = vec![None; size];
    for step in trace.steps() {
        row.iter_mut().for_each(|x| *x = None);
        for r in step.iter().filter(|r| r.mode.is_coordinated()) {
            let info = trace.vehicle(r.vehicle);
            if info.platoon == platoon {
                row[info.member as usize] = Some(r.u);
            }
        }
        if row.iter().all(Option::is_some) {
            for (seq, u) in out.iter_mut().zip(&row) {
                seq.push(u.expect("checked"));
            }
        }
    }
    out
}

/// String-stability check over every platoon in a trace.
pub fn check_trace_string_stability(trace: &SimTrace) -> StabilityReport {
    let mut platoons: Vec<PlatoonId> = trace.vehicles.iter().map(|v| v.platoon).collect();
    platoons.dedup();
    let mut worst = StabilityReport { stable: true, sup_deviation: 0.0 };
    for id in platoons {
        let r = check_string_stability(&platoon_controls(trace, id));
        worst.stable &= r.stable;
        worst.sup_deviation = worst.sup_deviation.max(r.sup_deviation);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Mode, TraceRecord, VehicleInfo};
    use crate::scenario::Road;

    fn two_member_trace(offsets: &[f64]) -> SimTrace {
        let vehicles = vec![
            VehicleInfo { id: 0, platoon: 0, member: 0, road: Road::Main },
            VehicleInfo { id: 1, platoon: 0, member: 1, road: Road::Main },
        ];
        let mut records = Vec::new();
        for (k, off) in offsets.iter().enumerate() {
            let p = 15.0 * k as f64 * 0.1;
            for (id, pos, u) in [(0, p, 0.0), (1, p - 7.0 - off, *off)] {
                records.push(TraceRecord {
                    step: k as u32,
                    vehicle: id,
                    mode: Mode::ExecutingPlan,
                    p: pos,
                    v: 15.0,
                    u,
                    fuel_rate: 0.0,
                });
            }
        }
        SimTrace { dt: 0.1, vehicles, records, events: Vec::new() }
    }

    #[test]
    fn control_law_copies_leader() {
        let info = MemberInfoSet { p_leader: 100.0, v_leader: 15.0, u_leader: 0.0 };
        assert_eq!(follower_control_input(&info), 0.0);
        let info = MemberInfoSet { u_leader: -1.25, ..info };
        assert_eq!(follower_control_input(&info), -1.25);
    }

    #[test]
    fn exact_gaps_pass() {
        let trace = two_member_trace(&[0.0; 20]);
        let report = check_intra_platoon_gaps(&trace, 2.0, 5.0, 1e-9);
        assert!(report.pass);
        assert_eq!(report.samples, 20);
        assert!(report.max_error < 1e-12);
        let s = check_trace_string_stability(&trace);
        assert!(s.stable && s.sup_deviation == 0.0);
    }

    #[test]
    fn perturbed_member_flagged() {
        let mut offsets = vec![0.0; 20];
        offsets[5..10].iter_mut().for_each(|o| *o = 0.1);
        let trace = two_member_trace(&offsets);
        let report = check_intra_platoon_gaps(&trace, 2.0, 5.0, 1e-6);
        assert!(!report.pass);
        assert!((report.pairs[0].max_error - 0.1).abs() < 1e-12);
        let s = check_trace_string_stability(&trace);
        assert!(!s.stable);
        assert!((s.sup_deviation - 0.1).abs() < 1e-12);
    }

    #[test]
    fn single_member_is_vacuously_stable() {
        let r = check_string_stability(&[vec![0.5, 0.25, 0.0]]);
        assert!(r.stable);
        assert!(check_string_stability(&[]).stable);
    }
}
