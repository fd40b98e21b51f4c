//! Platoon leader planning: the earliest exit time on the search grid whose
//! closed-form trajectory keeps rear-end distance to the platoon ahead and
//! lateral time headway to cross-road platoons at the conflict point.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coordinator::{InfoEntry, PlatoonId, PlatoonInfoSet};
use crate::scenario::{Road, VehicleParams};
use crate::trajectory::{
    feasible_window, solve_boundary, BoundaryConditions, Cubic, FeasibleWindow, Path, TrajectoryError,
    TrajectoryPolynomial,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("platoon {platoon}: feasible window [{t_lower}, {t_upper}] is empty")]
    EmptyWindow { platoon: PlatoonId, t_lower: f64, t_upper: f64 },
    #[error(
        "platoon {platoon}: no exit time in window passes safety checks (binding: {binding}, last margin {margin})"
    )]
    Infeasible { platoon: PlatoonId, binding: BindingConstraint, margin: f64 },
    #[error("exit speed {0} must be positive")]
    DegenerateSpeed(f64),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Constraint that set the returned exit time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingConstraint {
    /// The window's lower end passed every check.
    Window,
    RearEnd,
    Lateral,
}

impl std::fmt::Display for BindingConstraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BindingConstraint::Window => "window",
            BindingConstraint::RearEnd => "rear-end",
            BindingConstraint::Lateral => "lateral",
        })
    }
}

/// Motion of the last follower of the platoon ahead: its leader's path
/// shifted back by the platoon length.
#[derive(Debug, Clone, PartialEq)]
pub struct PredecessorTail {
    pub leader: Path,
    pub offset: f64,
}

impl PredecessorTail {
    /// From the predecessor's published plan: cruise extension before the
    /// plan, the plan, then a cruise at the exit speed.
    pub fn from_entry(entry: &InfoEntry, member_spacing: f64) -> Option<Self> {
        let plan = entry.plan?;
        Some(PredecessorTail { leader: Path::from_plan(&plan.phi), offset: (entry.size as f64 - 1.0) * member_spacing })
    }

    pub fn position(&self, t: f64) -> f64 {
        self.leader.state(t).p - self.offset
    }
}

/// Exit times of another platoon's leader and last follower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossExit {
    pub platoon: PlatoonId,
    pub tf: f64,
    pub tf_last: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanRequest {
    pub platoon: PlatoonId,
    pub road: Road,
    pub t_plan: f64,
    pub p_plan: f64,
    pub v_plan: f64,
    /// Position of the conflict point on this road.
    pub pf: f64,
    pub window: FeasibleWindow,
    pub info: PlatoonInfoSet,
    pub params: VehicleParams,
    pub size: u32,
    pub delta: f64,
    pub dt_search: f64,
}

impl PlanRequest {
    /// Request for a leader that entered at `(t0, 0, v0)` and cruised until
    /// `t_plan`.
    #[allow(clippy::too_many_arguments)]
    pub fn after_cruise(
        info: PlatoonInfoSet,
        t0: f64,
        v0: f64,
        t_plan: f64,
        pf: f64,
        params: VehicleParams,
        delta: f64,
        dt_search: f64,
    ) -> Self {
        let own = *info.own();
        let p_plan = v0 * (t_plan - t0);
        PlanRequest {
            platoon: own.platoon,
            road: own.road,
            t_plan,
            p_plan,
            v_plan: v0,
            pf,
            window: feasible_window(t_plan, p_plan, v0, pf, &params),
            info,
            params,
            size: own.size,
            delta,
            dt_search,
        }
    }

    pub fn member_spacing(&self) -> f64 {
        self.delta + self.params.l_c
    }

    pub fn boundary(&self, tf: f64) -> BoundaryConditions {
        BoundaryConditions { t0: self.t_plan, p0: self.p_plan, v0: self.v_plan, tf, pf: self.pf }
    }

    pub fn predecessor_tail(&self) -> Option<PredecessorTail> {
        self.info.road_predecessor().and_then(|e| PredecessorTail::from_entry(e, self.member_spacing()))
    }

    /// Planned other-road platoons whose last follower exits no earlier
    /// than `t_plan - t_h`; older ones cannot conflict.
    pub fn cross_exits(&self) -> Vec<CrossExit> {
        let cutoff = self.t_plan - self.params.t_h;
        self.info
            .predecessors()
            .iter()
            .filter(|e| e.road != self.road)
            .filter_map(|e| e.plan.map(|p| CrossExit { platoon: e.platoon, tf: p.tf, tf_last: p.tf_last }))
            .filter(|c| c.tf_last >= cutoff)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub tf: f64,
    pub phi: TrajectoryPolynomial,
    pub tf_last: f64,
    pub iterations: u32,
    pub binding: BindingConstraint,
}

/// Exit time of the last follower when the leader exits at `tf` with speed
/// `v_tf` and then cruises.
pub fn last_follower_exit(tf: f64, v_tf: f64, size: u32, delta: f64, l_c: f64) -> Result<f64, PlanError> {
    if !(v_tf > 0.0) {
        return Err(PlanError::DegenerateSpeed(v_tf));
    }
    Ok(tf + (size.max(1) as f64 - 1.0) * (delta + l_c) / v_tf)
}

/// Smallest value over `[candidate.t_start, candidate.t_end]` of
/// `p_tail(t) - p(t) - (γ + φ·v(t))`, or `None` without a predecessor.
///
/// Both motions are piecewise cubic, so the margin is a cubic between
/// breakpoints and its minimum is found exactly from the stationary points.
pub fn rear_end_margin(
    candidate: &TrajectoryPolynomial,
    predecessor: Option<&PredecessorTail>,
    params: &VehicleParams,
) -> Option<f64> {
    let tail = predecessor?;
    let (lo, hi) = (candidate.t_start, candidate.t_end);
    let mut cuts: Vec<f64> = std::iter::once(lo).chain(tail.leader.breakpoints(lo, hi)).chain([hi]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let own = candidate.cubic();
    let mut worst = f64::INFINITY;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let pred = tail.leader.local_poly(a).coeffs;
        let mine = own.rebased(a).coeffs;
        // p_pred - offset - p_own - gamma - phi * v_own, as a cubic in s = t - a
        let g = [
            pred[0] - tail.offset - mine[0] - params.gamma - params.phi * mine[1],
            pred[1] - mine[1] - params.phi * 2.0 * mine[2],
            pred[2] - mine[2] - params.phi * 3.0 * mine[3],
            pred[3] - mine[3],
        ];
        let (_, m) = Cubic::min_on_interval(g, b - a);
        worst = worst.min(m);
    }
    Some(worst)
}

/// Rear-end safety of a candidate against the last follower ahead.
pub fn rear_end_ok(
    candidate: &TrajectoryPolynomial,
    predecessor: Option<&PredecessorTail>,
    params: &VehicleParams,
) -> bool {
    rear_end_margin(candidate, predecessor, params).is_none_or(|m| m >= 0.0)
}

/// Largest lateral violation `min{t_h - (tf - tk_last), t_h - (tk - tf_last)}`
/// over the cross platoons; non-positive means every pair is separated.
pub fn lateral_violation(tf: f64, tf_last: f64, cross: &[CrossExit], t_h: f64) -> Option<f64> {
    cross.iter().map(|k| (t_h - (tf - k.tf_last)).min(t_h - (k.tf - tf_last))).max_by(f64::total_cmp)
}

/// Lateral headway at the conflict point against every cross platoon.
pub fn lateral_ok(tf: f64, tf_last: f64, cross: &[CrossExit], t_h: f64) -> bool {
    lateral_violation(tf, tf_last, cross, t_h).is_none_or(|v| v <= 0.0)
}

/// Earliest grid exit time `t_lower + k·dt_search` within the window that
/// passes both safety checks.
pub fn plan_leader(req: &PlanRequest) -> Result<Plan, PlanError> {
    let window = req.window;
    if window.is_empty() {
        return Err(PlanError::EmptyWindow { platoon: req.platoon, t_lower: window.t_lower, t_upper: window.t_upper });
    }
    let tail = req.predecessor_tail();
    let cross = req.cross_exits();
    let spacing = req.member_spacing();

    let mut binding = BindingConstraint::Window;
    let mut margin = 0.0;
    let mut k: u32 = 0;
    loop {
        let tf = window.t_lower + k as f64 * req.dt_search;
        if tf > window.t_upper + 1e-9 {
            return Err(PlanError::Infeasible { platoon: req.platoon, binding, margin });
        }
        let tf = tf.min(window.t_upper.max(window.t_lower));
        let phi = solve_boundary(&req.boundary(tf))?;
        let v_tf = phi.eval_unchecked(tf).v;
        let tf_last = tf + (req.size as f64 - 1.0) * spacing / v_tf;

        let rear = rear_end_margin(&phi, tail.as_ref(), &req.params);
        if let Some(m) = rear.filter(|m| *m < 0.0) {
            binding = BindingConstraint::RearEnd;
            margin = m;
        } else if let Some(v) = lateral_violation(tf, tf_last, &cross, req.params.t_h).filter(|v| *v > 0.0) {
            binding = BindingConstraint::Lateral;
            margin = -v;
        } else {
            return Ok(Plan { tf, phi, tf_last, iterations: k, binding });
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coordinator::PublishedPlan;

    fn params() -> VehicleParams {
        VehicleParams::default()
    }

    fn own(platoon: PlatoonId, road: Road, t0: f64, size: u32) -> InfoEntry {
        InfoEntry { platoon, road, size, entry_time: t0, plan: None, archived: false }
    }

    fn planned(platoon: PlatoonId, road: Road, size: u32, phi: TrajectoryPolynomial, tf_last: f64) -> InfoEntry {
        InfoEntry {
            platoon,
            road,
            size,
            entry_time: phi.t_start,
            plan: Some(PublishedPlan {
                phi,
                tf: phi.t_end,
                tf_last,
                planned_at: phi.t_start,
                published_at: phi.t_start,
            }),
            archived: false,
        }
    }

    fn request(entries: Vec<InfoEntry>, t0: f64, v0: f64) -> PlanRequest {
        let owner = entries.last().unwrap().platoon;
        let info = PlatoonInfoSet { owner, as_of: t0, entries };
        PlanRequest::after_cruise(info, t0, v0, t0, 560.0, params(), 2.0, 0.1)
    }

    #[test]
    fn last_follower_formula() {
        assert_eq!(last_follower_exit(60.0, 16.67, 1, 2.0, 5.0).unwrap(), 60.0);
        let t = last_follower_exit(60.0, 16.67, 4, 2.0, 5.0).unwrap();
        assert!((t - (60.0 + 21.0 / 16.67)).abs() < 1e-12);
        assert!((t - 61.26).abs() < 0.01);
        let doubled = last_follower_exit(60.0, 16.67, 4, 9.0, 5.0).unwrap();
        assert!(((doubled - 60.0) - 2.0 * (t - 60.0)).abs() < 1e-12);
        assert_eq!(last_follower_exit(60.0, 0.0, 4, 2.0, 5.0), Err(PlanError::DegenerateSpeed(0.0)));
    }

    #[test]
    fn lateral_examples() {
        let k = CrossExit { platoon: 0, tf: 47.0, tf_last: 49.0 };
        assert!(!lateral_ok(50.0, 51.0, &[k], 1.5));
        assert!((lateral_violation(50.0, 51.0, &[k], 1.5).unwrap() - 0.5).abs() < 1e-12);
        let exact = CrossExit { platoon: 0, tf: 47.0, tf_last: 48.5 };
        assert!(lateral_ok(50.0, 51.0, &[exact], 1.5));
        assert!(lateral_ok(50.0, 51.0, &[], 1.5));
    }

    #[test]
    fn empty_zone_returns_window_lower_bound() {
        let req = request(vec![own(0, Road::Main, 2.0, 3)], 2.0, 15.0);
        let plan = plan_leader(&req).unwrap();
        assert_eq!(plan.tf, req.window.t_lower);
        assert_eq!(plan.iterations, 0);
        assert_eq!(plan.binding, BindingConstraint::Window);
        assert!(plan.phi.eval(plan.tf).unwrap().u.abs() < 1e-9);
    }

    #[test]
    fn no_predecessor_is_vacuously_safe() {
        let phi = solve_boundary(&BoundaryConditions { t0: 0.0, p0: 0.0, v0: 15.0, tf: 36.0, pf: 560.0 }).unwrap();
        assert!(rear_end_ok(&phi, None, &params()));
        assert!(rear_end_margin(&phi, None, &params()).is_none());
    }

    #[test]
    fn rear_end_margin_detects_small_dip() {
        let p = params();
        // Both cruise at 15 m/s; gap set 0.005 m short of the safe distance.
        let v = 15.0;
        let own_phi =
            solve_boundary(&BoundaryConditions { t0: 0.0, p0: 0.0, v0: v, tf: 560.0 / v, pf: 560.0 }).unwrap();
        let short = p.safe_distance(v) - 0.005;
        let tail = PredecessorTail { leader: Path::cruising(0.0, short + 14.0, v), offset: 14.0 };
        let m = rear_end_margin(&own_phi, Some(&tail), &p).unwrap();
        assert!((m + 0.005).abs() < 1e-9, "{m}");
        assert!(!rear_end_ok(&own_phi, Some(&tail), &p));
        let exact = PredecessorTail { leader: Path::cruising(0.0, p.safe_distance(v) + 14.0, v), offset: 14.0 };
        assert!(rear_end_ok(&own_phi, Some(&exact), &p));
    }

    #[test]
    fn tight_predecessor_delays_exit() {
        let p = params();
        // Slow predecessor ahead on the same road.
        let pred_phi = solve_boundary(&BoundaryConditions { t0: 0.5, p0: 7.0, v0: 14.0, tf: 60.0, pf: 560.0 }).unwrap();
        let v_exit = pred_phi.eval(60.0).unwrap().v;
        let pred_last = last_follower_exit(60.0, v_exit, 3, 2.0, p.l_c).unwrap();
        let entries = vec![planned(0, Road::Main, 3, pred_phi, pred_last), own(1, Road::Main, 8.0, 2)];
        let req = request(entries, 8.0, 16.0);
        let plan = plan_leader(&req).unwrap();
        assert!(plan.tf > req.window.t_lower);
        assert_eq!(plan.binding, BindingConstraint::RearEnd);
        // The previous grid point fails the rear-end check.
        let prev = solve_boundary(&req.boundary(plan.tf - req.dt_search)).unwrap();
        assert!(!rear_end_ok(&prev, req.predecessor_tail().as_ref(), &p));
    }

    #[test]
    fn lateral_conflict_pushes_exit_past_headway() {
        let p = params();
        let req0 = request(vec![own(1, Road::Ramp, 0.0, 2)], 0.0, 15.0);
        let free_tf = req0.window.t_lower;
        // A cross platoon whose last follower exits right at the free exit time.
        let k_phi =
            solve_boundary(&BoundaryConditions { t0: 0.0, p0: 0.0, v0: 15.0, tf: free_tf - 1.0, pf: 560.0 }).unwrap();
        let entries = vec![planned(0, Road::Main, 4, k_phi, free_tf), own(1, Road::Ramp, 0.0, 2)];
        let req = request(entries, 0.0, 15.0);
        let plan = plan_leader(&req).unwrap();
        assert_eq!(plan.binding, BindingConstraint::Lateral);
        assert!(plan.tf - free_tf >= p.t_h - 1e-9);
        assert!(plan.tf - free_tf < p.t_h + req.dt_search + 1e-9);
    }

    #[test]
    fn archived_cross_platoons_outside_horizon_ignored() {
        let k_phi = solve_boundary(&BoundaryConditions { t0: 0.0, p0: 0.0, v0: 15.0, tf: 36.0, pf: 560.0 }).unwrap();
        let mut old = planned(0, Road::Main, 2, k_phi, 36.5);
        old.archived = true;
        let req = request(vec![old, own(1, Road::Ramp, 100.0, 2)], 100.0, 15.0);
        assert!(req.cross_exits().is_empty());
    }
}
