//! Online constraint checks run at every step of the engine.

use serde::{Deserialize, Serialize};

use crate::coordinator::PlatoonId;
use crate::engine::trace::VehicleId;
use crate::scenario::VehicleParams;

/// Slack for bound checks; absorbs rounding in polynomial evaluation.
pub const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    ControlBound,
    SpeedBound,
    /// Speed-dependent gap to the last follower of the platoon ahead.
    RearEnd,
    IntraPlatoonGap,
    /// Time headway between cross-road exits at the conflict point.
    Lateral,
    /// Two vehicles in one lane closer than a vehicle length.
    Overlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub kind: ViolationKind,
    pub vehicles: Vec<VehicleId>,
    pub platoons: Vec<PlatoonId>,
    /// Amount by which the constraint is missed (positive).
    pub excess: f64,
    pub detail: String,
    /// Steps at which the same constraint between the same parties failed.
    pub occurrences: u32,
}

/// Control and speed bounds. Coordinated vehicles inside the control zone
/// must respect `[v_min, v_max]`; everyone else only `[0, v_max]`.
pub fn check_bounds(
    t: f64,
    vehicle: VehicleId,
    platoon: PlatoonId,
    v: f64,
    u: f64,
    coordinated_in_zone: bool,
    params: &VehicleParams,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let v_floor = if coordinated_in_zone { params.v_min } else { 0.0 };
    let speed_excess = (v_floor - v).max(v - params.v_max);
    if speed_excess > TOLERANCE {
        out.push(Violation {
            t,
            kind: ViolationKind::SpeedBound,
            vehicles: vec![vehicle],
            platoons: vec![platoon],
            occurrences: 1,
            excess: speed_excess,
            detail: format!("speed {v} outside [{v_floor}, {}]", params.v_max),
        });
    }
    let control_excess = (params.u_min - u).max(u - params.u_max);
    if control_excess > TOLERANCE {
        out.push(Violation {
            t,
            kind: ViolationKind::ControlBound,
            vehicles: vec![vehicle],
            platoons: vec![platoon],
            occurrences: 1,
            excess: control_excess,
            detail: format!("control {u} outside [{}, {}]", params.u_min, params.u_max),
        });
    }
    out
}

/// Rear-end gap between the last follower `ahead` of one platoon and the
/// leader `behind` of the next one on the same road.
pub fn check_rear_end(
    t: f64,
    ahead: (VehicleId, PlatoonId, f64),
    behind: (VehicleId, PlatoonId, f64, f64),
    params: &VehicleParams,
) -> Option<Violation> {
    let (va, pa, p_ahead) = ahead;
    let (vb, pb, p_behind, v_behind) = behind;
    let gap = p_ahead - p_behind;
    let need = params.safe_distance(v_behind);
    (need - gap > TOLERANCE).then(|| Violation {
        t,
        kind: ViolationKind::RearEnd,
        vehicles: vec![va, vb],
        platoons: vec![pa, pb],
        occurrences: 1,
        excess: need - gap,
        detail: format!("gap {gap:.6} below safe distance {need:.6}"),
    })
}

/// Spacing between consecutive members of one platoon.
pub fn check_member_gap(
    t: f64,
    platoon: PlatoonId,
    front: (VehicleId, f64),
    back: (VehicleId, f64),
    spacing: f64,
) -> Option<Violation> {
    let gap = front.1 - back.1;
    (spacing - gap > TOLERANCE).then(|| Violation {
        t,
        kind: ViolationKind::IntraPlatoonGap,
        vehicles: vec![front.0, back.0],
        platoons: vec![platoon],
        occurrences: 1,
        excess: spacing - gap,
        detail: format!("member spacing {gap:.6} below {spacing}"),
    })
}

/// Observed exits of one platoon at the conflict point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitRecord {
    pub platoon: PlatoonId,
    pub leader: f64,
    pub last: f64,
}

/// Cross-road exit headway: one platoon must clear the conflict point
/// `t_h` before the other's leader arrives, in either order.
pub fn check_lateral(t: f64, i: ExitRecord, k: ExitRecord, t_h: f64) -> Option<Violation> {
    let excess = (t_h - (i.leader - k.last)).min(t_h - (k.leader - i.last));
    (excess > TOLERANCE).then(|| Violation {
        t,
        kind: ViolationKind::Lateral,
        vehicles: Vec::new(),
        platoons: vec![k.platoon, i.platoon],
        excess,
        occurrences: 1,
        detail: format!(
            "exits [{:.4}, {:.4}] and [{:.4}, {:.4}] closer than headway {t_h}",
            k.leader, k.last, i.leader, i.last
        ),
    })
}

/// Physical overlap of two vehicles in one lane.
pub fn check_overlap(
    t: f64,
    front: (VehicleId, PlatoonId, f64),
    back: (VehicleId, PlatoonId, f64),
    l_c: f64,
) -> Option<Violation> {
    let gap = front.2 - back.2;
    (gap <= l_c).then(|| Violation {
        t,
        kind: ViolationKind::Overlap,
        vehicles: vec![front.0, back.0],
        platoons: vec![front.1, back.1],
        occurrences: 1,
        excess: l_c - gap,
        detail: format!("center spacing {gap:.4} below vehicle length {l_c}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lateral_examples() {
        let k = ExitRecord { platoon: 0, leader: 50.0, last: 51.0 };
        let close = ExitRecord { platoon: 1, leader: 51.9, last: 53.0 };
        let v = check_lateral(52.0, close, k, 1.5).unwrap();
        assert_eq!(v.kind, ViolationKind::Lateral);
        assert!((v.excess - 0.6).abs() < 1e-12);
        let clear = ExitRecord { platoon: 1, leader: 52.5, last: 53.0 };
        assert!(check_lateral(53.0, clear, k, 1.5).is_none());
        // Reverse order also satisfies the disjunction.
        let before = ExitRecord { platoon: 1, leader: 45.0, last: 48.5 };
        assert!(check_lateral(53.0, before, k, 1.5).is_none());
    }

    #[test]
    fn bounds() {
        let p = VehicleParams::default();
        assert!(check_bounds(0.0, 0, 0, 10.0, 1.0, true, &p).is_empty());
        let v = check_bounds(0.0, 0, 0, 4.0, 3.5, true, &p);
        assert_eq!(v.len(), 2);
        assert!(check_bounds(0.0, 0, 0, 4.0, 0.0, false, &p).is_empty());
    }

    #[test]
    fn rear_end_and_overlap() {
        let p = VehicleParams::default();
        assert!(check_rear_end(0.0, (0, 0, 100.0), (1, 1, 100.0 - p.safe_distance(15.0), 15.0), &p).is_none());
        assert!(check_rear_end(0.0, (0, 0, 100.0), (1, 1, 100.0 - p.safe_distance(15.0) + 0.01, 15.0), &p).is_some());
        assert!(check_overlap(0.0, (0, 0, 10.0), (1, 0, 4.5), 5.0).is_none());
        assert!(check_overlap(0.0, (0, 0, 10.0), (1, 0, 5.0), 5.0).is_some());
        assert!(check_member_gap(0.0, 0, (0, 10.0), (1, 3.0), 7.0).is_none());
        assert!(check_member_gap(0.0, 0, (0, 10.0), (1, 3.1), 7.0).is_some());
    }
}
