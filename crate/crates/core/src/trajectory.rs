//! Closed-form unconstrained leader trajectories.
//!
//! A leader that leaves its terminal speed free and minimizes control effort
//! follows a cubic position profile with a linear control input. Given the
//! entry state, the exit position and an exit time, the four coefficients are
//! fixed by the boundary conditions, and the set of exit times for which that
//! cubic never touches a speed or control bound is a closed interval.
//!
//! All polynomials are stored in time relative to an origin (the planning
//! instant) so that coefficient magnitudes stay bounded over long runs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::VehicleParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("degenerate boundary: exit time {tf} does not follow start time {t0}")]
    DegenerateBoundary { t0: f64, tf: f64 },
    #[error("invalid boundary: {0}")]
    InvalidBoundary(String),
    #[error("time {t} outside validity interval [{t_start}, {t_end}]")]
    OutOfDomain { t: f64, t_start: f64, t_end: f64 },
}

/// Position, speed and control at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub p: f64,
    pub v: f64,
    pub u: f64,
}

/// Cubic `c0 + c1·s + c2·s² + c3·s³` in `s = t - origin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cubic {
    pub origin: f64,
    pub coeffs: [f64; 4],
}

impl Cubic {
    /// Constant-speed motion through `p` at time `t`.
    pub fn cruise(t: f64, p: f64, v: f64) -> Self {
        Cubic { origin: t, coeffs: [p, v, 0.0, 0.0] }
    }

    pub fn state(&self, t: f64) -> State {
        let s = t - self.origin;
        let [c0, c1, c2, c3] = self.coeffs;
        State {
            p: ((c3 * s + c2) * s + c1) * s + c0,
            v: (3.0 * c3 * s + 2.0 * c2) * s + c1,
            u: 6.0 * c3 * s + 2.0 * c2,
        }
    }

    /// Same polynomial expressed around a new origin.
    pub fn rebased(&self, origin: f64) -> Self {
        let st = self.state(origin);
        Cubic { origin, coeffs: [st.p, st.v, 0.5 * st.u, self.coeffs[3]] }
    }

    /// Minimum of a cubic given by ascending coefficients over `s ∈ [0, h]`,
    /// returned as `(s_min, value)`.
    pub fn min_on_interval(coeffs: [f64; 4], h: f64) -> (f64, f64) {
        let value = |s: f64| ((coeffs[3] * s + coeffs[2]) * s + coeffs[1]) * s + coeffs[0];
        let mut best = (0.0, value(0.0));
        if h > 0.0 && value(h) < best.1 {
            best = (h, value(h));
        }
        let mut consider = |s: f64| {
            if s > 0.0 && s < h {
                let v = value(s);
                if v < best.1 {
                    best = (s, v);
                }
            }
        };
        // Stationary points: 3c3 s² + 2c2 s + c1 = 0.
        let (qa, qb, qc) = (3.0 * coeffs[3], 2.0 * coeffs[2], coeffs[1]);
        if qa.abs() > f64::EPSILON * (qb.abs() + qc.abs()).max(1.0) {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                // Numerically stable pair of roots.
                let q = -0.5 * (qb + qb.signum() * sq);
                if q != 0.0 {
                    consider(q / qa);
                    consider(qc / q);
                } else {
                    consider(0.0);
                }
            }
        } else if qb != 0.0 {
            consider(-qc / qb);
        }
        best
    }
}

/// The leader's closed-form plan `p(t) = a s³ + b s² + c s + d` with
/// `s = t - t_origin`, valid on `[t_start, t_end]`.
///
/// Control is linear, speed quadratic and position cubic in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPolynomial {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub t_origin: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl TrajectoryPolynomial {
    pub fn cubic(&self) -> Cubic {
        Cubic { origin: self.t_origin, coeffs: [self.d, self.c, self.b, self.a] }
    }

    /// Evaluate on the validity interval.
    pub fn eval(&self, t: f64) -> Result<State, TrajectoryError> {
        if !(t >= self.t_start && t <= self.t_end) {
            return Err(TrajectoryError::OutOfDomain { t, t_start: self.t_start, t_end: self.t_end });
        }
        Ok(self.cubic().state(t))
    }

    /// Evaluate without the domain check (polynomial extension).
    pub fn eval_unchecked(&self, t: f64) -> State {
        self.cubic().state(t)
    }

    /// Coefficients `[a, b, c, d]` of the same cubic written in absolute time.
    pub fn absolute_coefficients(&self) -> [f64; 4] {
        let (a, b, c, d, o) = (self.a, self.b, self.c, self.d, self.t_origin);
        [a, b - 3.0 * a * o, 3.0 * a * o * o - 2.0 * b * o + c, -a * o * o * o + b * o * o - c * o + d]
    }
}

/// Entry state, exit time and exit position for one leader.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub t0: f64,
    pub p0: f64,
    pub v0: f64,
    pub tf: f64,
    pub pf: f64,
}

/// Solve `p(t0)=p0, v(t0)=v0, p(tf)=pf, u(tf)=0` for the cubic coefficients.
///
/// With `T = tf - t0` and `D = pf - p0` the system eliminates to
/// `a = (v0·T - D) / (2T³)`, `b = -3aT`, `c = v0`, `d = p0`.
pub fn solve_boundary(bc: &BoundaryConditions) -> Result<TrajectoryPolynomial, TrajectoryError> {
    let finite = [bc.t0, bc.p0, bc.v0, bc.tf, bc.pf].iter().all(|x| x.is_finite());
    if !finite {
        return Err(TrajectoryError::InvalidBoundary("non-finite boundary value".into()));
    }
    if !(bc.tf > bc.t0) {
        return Err(TrajectoryError::DegenerateBoundary { t0: bc.t0, tf: bc.tf });
    }
    if !(bc.pf > bc.p0) {
        return Err(TrajectoryError::InvalidBoundary(format!(
            "exit position {} must lie ahead of start position {}",
            bc.pf, bc.p0
        )));
    }
    let horizon = bc.tf - bc.t0;
    let distance = bc.pf - bc.p0;
    let a = (bc.v0 * horizon - distance) / (2.0 * horizon * horizon * horizon);
    Ok(TrajectoryPolynomial {
        a,
        b: -3.0 * a * horizon,
        c: bc.v0,
        d: bc.p0,
        t_origin: bc.t0,
        t_start: bc.t0,
        t_end: bc.tf,
    })
}

/// Which formula produced the upper end of the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperBoundCase {
    /// The control bound can never be reached while decelerating; only the
    /// minimum speed limits how late the leader may exit.
    SpeedOnly,
    /// Both the minimum speed and the minimum control input are reachable.
    SpeedAndControl,
}

/// Candidate exit times, all absolute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowCandidates {
    pub t_u_max: f64,
    pub t_v_max: f64,
    pub t_u_min: Option<f64>,
    pub t_v_min: f64,
}

/// Closed interval of admissible exit times `[t_lower, t_upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleWindow {
    pub t_lower: f64,
    pub t_upper: f64,
    pub candidates: WindowCandidates,
    pub upper_case: UpperBoundCase,
}

impl FeasibleWindow {
    pub fn is_empty(&self) -> bool {
        !(self.t_lower <= self.t_upper)
    }

    pub fn contains(&self, tf: f64) -> bool {
        tf >= self.t_lower && tf <= self.t_upper
    }

    pub fn width(&self) -> f64 {
        self.t_upper - self.t_lower
    }
}

/// Exit-time window for a leader at `(t0, p0, v0)` heading to `pf`.
///
/// Because control is linear and vanishes at the exit, speed is monotone
/// along the trajectory: the extreme control sits at the start and the
/// extreme speed at the exit. The lower end is where either the start
/// control reaches `u_max` or the exit speed reaches `v_max`, whichever
/// comes later; the upper end is where the exit speed drops to `v_min` or,
/// when reachable, where the start control drops to `u_min`, whichever comes
/// first. Endpoints are admissible.
pub fn feasible_window(t0: f64, p0: f64, v0: f64, pf: f64, params: &VehicleParams) -> FeasibleWindow {
    let distance = pf - p0;
    let t_v_max = 3.0 * distance / (v0 + 2.0 * params.v_max);
    let t_u_max = ((9.0 * v0 * v0 + 12.0 * distance * params.u_max).sqrt() - 3.0 * v0) / (2.0 * params.u_max);
    let t_v_min = 3.0 * distance / (v0 + 2.0 * params.v_min);
    let disc = 9.0 * v0 * v0 + 12.0 * distance * params.u_min;

    let lower = t_u_max.max(t_v_max);
    let (upper, t_u_min, case) = if disc < 0.0 {
        (t_v_min, None, UpperBoundCase::SpeedOnly)
    } else {
        // Smaller root of |u_min| T² - 3 v0 T + 3 D = 0, in a form that
        // avoids cancellation.
        let t_u_min = 6.0 * distance / (3.0 * v0 + disc.sqrt());
        (t_u_min.min(t_v_min), Some(t0 + t_u_min), UpperBoundCase::SpeedAndControl)
    };

    FeasibleWindow {
        t_lower: t0 + lower,
        t_upper: t0 + upper,
        candidates: WindowCandidates { t_u_max: t0 + t_u_max, t_v_max: t0 + t_v_max, t_u_min, t_v_min: t0 + t_v_min },
        upper_case: case,
    }
}

/// One polynomial piece of a [`Path`], valid on `[t_from, t_to)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t_from: f64,
    pub t_to: f64,
    pub poly: Cubic,
}

/// Piecewise-cubic motion of a platoon leader over its whole life in the
/// network: cruise during the delay, the planned cubic, then a cruise at
/// the exit speed. Before the first segment the motion is extended at the
/// first segment's initial speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    segments: Vec<Segment>,
}

impl Path {
    /// Cruise at `v0` from `(t0, p0)` forever.
    pub fn cruising(t0: f64, p0: f64, v0: f64) -> Self {
        Path { segments: vec![Segment { t_from: t0, t_to: f64::INFINITY, poly: Cubic::cruise(t0, p0, v0) }] }
    }

    /// Cruise from `(t0, p0, v0)` until the plan starts, follow the plan,
    /// then cruise at the plan's exit speed.
    pub fn planned(t0: f64, p0: f64, v0: f64, plan: &TrajectoryPolynomial) -> Self {
        let mut segments = Vec::with_capacity(3);
        if plan.t_start > t0 {
            segments.push(Segment { t_from: t0, t_to: plan.t_start, poly: Cubic::cruise(t0, p0, v0) });
        }
        segments.push(Segment { t_from: plan.t_start, t_to: plan.t_end, poly: plan.cubic() });
        let exit = plan.eval_unchecked(plan.t_end);
        segments.push(Segment {
            t_from: plan.t_end,
            t_to: f64::INFINITY,
            poly: Cubic::cruise(plan.t_end, exit.p, exit.v),
        });
        Path { segments }
    }

    /// The plan alone, extended backward and forward at constant speed.
    pub fn from_plan(plan: &TrajectoryPolynomial) -> Self {
        let start = plan.eval_unchecked(plan.t_start);
        Path::planned(plan.t_start, start.p, start.v, plan)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    fn segment_at(&self, t: f64) -> &Segment {
        let idx = self.segments.partition_point(|s| s.t_to <= t);
        &self.segments[idx.min(self.segments.len() - 1)]
    }

    pub fn state(&self, t: f64) -> State {
        let first = &self.segments[0];
        if t < first.t_from {
            let st = first.poly.state(first.t_from);
            return State { p: st.p + st.v * (t - first.t_from), v: st.v, u: 0.0 };
        }
        self.segment_at(t).poly.state(t)
    }

    /// Polynomial in force on `[t, ...)`, rebased at `t`.
    pub fn local_poly(&self, t: f64) -> Cubic {
        let first = &self.segments[0];
        if t < first.t_from {
            let st = first.poly.state(first.t_from);
            return Cubic::cruise(first.t_from, st.p, st.v).rebased(t);
        }
        self.segment_at(t).poly.rebased(t)
    }

    /// Segment boundaries strictly inside `(lo, hi)`.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().flat_map(|s| [s.t_from, s.t_to]).filter(move |&t| t > lo && t < hi)
    }

    /// Time at which the position reaches `target` within `[lo, hi]`,
    /// assuming positive speed on that interval.
    pub fn crossing_time(&self, target: f64, lo: f64, hi: f64) -> Option<f64> {
        let (mut a, mut b) = (lo, hi);
        if self.state(a).p > target || self.state(b).p < target {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.state(mid).p < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        Some(0.5 * (a + b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> VehicleParams {
        VehicleParams { u_min: -3.0, u_max: 3.0, v_min: 5.0, v_max: 16.67, ..VehicleParams::default() }
    }

    #[test]
    fn cruise_solution_is_exact() {
        let bc = BoundaryConditions { t0: 0.0, p0: 0.0, v0: 16.0, tf: 35.0, pf: 560.0 };
        let traj = solve_boundary(&bc).unwrap();
        assert_eq!((traj.a, traj.b, traj.c, traj.d), (0.0, 0.0, 16.0, 0.0));
        let st = traj.eval(10.0).unwrap();
        assert_eq!((st.p, st.v, st.u), (160.0, 16.0, 0.0));
    }

    #[test]
    fn degenerate_boundary_rejected() {
        let bc = BoundaryConditions { t0: 3.0, p0: 0.0, v0: 16.0, tf: 3.0, pf: 560.0 };
        assert!(matches!(solve_boundary(&bc), Err(TrajectoryError::DegenerateBoundary { .. })));
    }

    #[test]
    fn eval_outside_domain_fails() {
        let bc = BoundaryConditions { t0: 0.0, p0: 0.0, v0: 14.0, tf: 34.0, pf: 560.0 };
        let traj = solve_boundary(&bc).unwrap();
        assert!(traj.eval(-0.1).is_err());
        assert!(traj.eval(34.0001).is_err());
        assert!(traj.eval(34.0).unwrap().u.abs() < 1e-12);
    }

    #[test]
    fn absolute_coefficients_match_relative_form() {
        let bc = BoundaryConditions { t0: 12.0, p0: 3.0, v0: 14.0, tf: 45.0, pf: 560.0 };
        let traj = solve_boundary(&bc).unwrap();
        let [a, b, c, d] = traj.absolute_coefficients();
        for &t in &[12.0, 20.0, 33.3, 45.0] {
            let p = ((a * t + b) * t + c) * t + d;
            let u = 6.0 * a * t + 2.0 * b;
            let st = traj.eval(t).unwrap();
            assert!((p - st.p).abs() < 1e-8, "{p} vs {}", st.p);
            assert!((u - st.u).abs() < 1e-10);
        }
    }

    #[test]
    fn window_example_values() {
        let p = params();
        let w = feasible_window(0.0, 0.0, 15.0, 560.0, &p);
        assert!((w.candidates.t_v_max - 1680.0 / 48.34).abs() < 1e-9);
        assert!((w.candidates.t_u_max - ((22185.0f64).sqrt() - 45.0) / 6.0).abs() < 1e-9);
        assert!((w.candidates.t_u_max - 17.32).abs() < 0.01);
        // Both bounds must hold, so the later candidate governs.
        assert_eq!(w.t_lower, w.candidates.t_v_max);
        assert_eq!(w.upper_case, UpperBoundCase::SpeedOnly);
        assert!((w.t_upper - 67.2).abs() < 1e-9);
    }

    #[test]
    fn window_cruise_at_speed_limit() {
        let p = params();
        let w = feasible_window(5.0, 0.0, p.v_max, p.v_max * 30.0, &p);
        assert!((w.candidates.t_v_max - 35.0).abs() < 1e-9);
        assert!((w.t_lower - 35.0).abs() < 1e-9);
    }

    #[test]
    fn window_offsets_by_start_time() {
        let p = params();
        let a = feasible_window(0.0, 100.0, 14.0, 560.0, &p);
        let b = feasible_window(250.0, 100.0, 14.0, 560.0, &p);
        assert!((b.t_lower - a.t_lower - 250.0).abs() < 1e-9);
        assert!((b.t_upper - a.t_upper - 250.0).abs() < 1e-9);
    }

    #[test]
    fn window_control_branch_near_exit() {
        let p = params();
        // Short remaining distance at high speed: hard braking becomes reachable.
        let w = feasible_window(0.0, 510.0, 16.0, 560.0, &p);
        assert_eq!(w.upper_case, UpperBoundCase::SpeedAndControl);
        let t_u_min = w.candidates.t_u_min.unwrap();
        let traj =
            solve_boundary(&BoundaryConditions { t0: 0.0, p0: 510.0, v0: 16.0, tf: t_u_min, pf: 560.0 }).unwrap();
        assert!((traj.eval(0.0).unwrap().u - p.u_min).abs() < 1e-9);
        assert!(!w.is_empty());
    }

    #[test]
    fn cubic_minimum_finds_interior_extremum() {
        // (s - 1)² - 2 = s² - 2s - 1 on [0, 3]
        let (s, v) = Cubic::min_on_interval([-1.0, -2.0, 1.0, 0.0], 3.0);
        assert!((s - 1.0).abs() < 1e-12);
        assert!((v + 2.0).abs() < 1e-12);
        // s³ - 3s on [0, 2]: min at s = 1, value -2
        let (s, v) = Cubic::min_on_interval([0.0, -3.0, 0.0, 1.0], 2.0);
        assert!((s - 1.0).abs() < 1e-12 && (v + 2.0).abs() < 1e-12);
    }

    #[test]
    fn path_is_continuous_across_segments() {
        let plan = solve_boundary(&BoundaryConditions { t0: 1.0, p0: 15.0, v0: 15.0, tf: 36.0, pf: 560.0 }).unwrap();
        let path = Path::planned(0.0, 0.0, 15.0, &plan);
        for &t in &[1.0, 36.0] {
            let before = path.state(t - 1e-9);
            let after = path.state(t);
            assert!((before.p - after.p).abs() < 1e-6);
            assert!((before.v - after.v).abs() < 1e-6);
        }
        let exit = path.crossing_time(560.0, 30.0, 40.0).unwrap();
        assert!((exit - 36.0).abs() < 1e-9);
    }
}
