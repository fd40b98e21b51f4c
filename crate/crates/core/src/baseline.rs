//! Human-driven baseline: Intelligent Driver Model car following and a
//! priority rule at the conflict point where ramp traffic yields to main
//! road traffic.

use serde::{Deserialize, Serialize};

use crate::scenario::{ScenarioError, VehicleParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarFollowingParams {
    pub desired_speed: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    pub desired_time_headway: f64,
    pub jam_distance: f64,
    /// Exponent of the free-road term.
    pub accel_exponent: f64,
    /// Distance to the conflict point within which ramp vehicles check for
    /// main road traffic.
    pub lookahead: f64,
    /// Main road vehicles closer than this (in time) to the conflict point
    /// force a ramp vehicle to yield.
    pub critical_gap: f64,
    /// Time headway a member of a human-driven platoon keeps to the member
    /// ahead of it; the jam distance there is the platoon's gap.
    pub platoon_headway: f64,
}

impl Default for CarFollowingParams {
    fn default() -> Self {
        CarFollowingParams {
            desired_speed: 16.67,
            max_accel: 1.5,
            comfortable_decel: 2.0,
            desired_time_headway: 1.5,
            jam_distance: 2.0,
            accel_exponent: 4.0,
            lookahead: 150.0,
            critical_gap: 4.0,
            platoon_headway: 0.5,
        }
    }
}

impl CarFollowingParams {
    pub fn validate(&self, limits: &VehicleParams) -> Result<(), ScenarioError> {
        let fields = [
            ("car_following.desired_speed", self.desired_speed),
            ("car_following.max_accel", self.max_accel),
            ("car_following.comfortable_decel", self.comfortable_decel),
            ("car_following.desired_time_headway", self.desired_time_headway),
            ("car_following.jam_distance", self.jam_distance),
            ("car_following.accel_exponent", self.accel_exponent),
            ("car_following.lookahead", self.lookahead),
            ("car_following.critical_gap", self.critical_gap),
        ];
        for (field, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ScenarioError::Invalid { field, reason: format!("must be positive, got {value}") });
            }
        }
        if !(self.platoon_headway >= 0.0 && self.platoon_headway.is_finite()) {
            return Err(ScenarioError::Invalid {
                field: "car_following.platoon_headway",
                reason: format!("must be non-negative, got {}", self.platoon_headway),
            });
        }
        if self.desired_speed > limits.v_max {
            return Err(ScenarioError::Invalid {
                field: "car_following.desired_speed",
                reason: format!("{} exceeds v_max {}", self.desired_speed, limits.v_max),
            });
        }
        Ok(())
    }

    /// Bumper-to-bumper gap a driver keeps at steady speed `v`.
    pub fn equilibrium_gap(&self, v: f64) -> f64 {
        let ratio = (v / self.desired_speed).powf(self.accel_exponent);
        if ratio >= 1.0 {
            return f64::INFINITY;
        }
        (self.jam_distance + v * self.desired_time_headway) / (1.0 - ratio).sqrt()
    }
}

/// The vehicle (or stop line) ahead of a driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lead {
    /// Bumper-to-bumper distance.
    pub gap: f64,
    pub speed: f64,
}

/// IDM acceleration, clipped to the control bounds.
pub fn car_following_accel(speed: f64, lead: Option<Lead>, params: &CarFollowingParams, limits: &VehicleParams) -> f64 {
    let a = params.max_accel;
    let free = 1.0 - (speed.max(0.0) / params.desired_speed).powf(params.accel_exponent);
    let raw = match lead {
        None => a * free,
        Some(lead) if lead.gap <= 0.0 => limits.u_min,
        Some(lead) => {
            let closing = speed * (speed - lead.speed) / (2.0 * (a * params.comfortable_decel).sqrt());
            let desired = params.jam_distance + (speed * params.desired_time_headway + closing).max(0.0);
            a * (free - (desired / lead.gap).powi(2))
        }
    };
    raw.clamp(limits.u_min, limits.u_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YieldDecision {
    Proceed,
    Yield,
}

/// A vehicle approaching the conflict point, by distance to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Approach {
    pub distance: f64,
    pub speed: f64,
}

/// Priority rule for a ramp vehicle.
///
/// The ramp vehicle yields when it is inside the lookahead, can still stop
/// before the conflict point at full braking, and some main road vehicle
/// would reach the conflict point within the critical gap. A stopped ramp
/// vehicle applies the same rule when deciding to discharge.
pub fn yield_decision(
    ramp: Approach,
    main_traffic: &[Approach],
    params: &CarFollowingParams,
    limits: &VehicleParams,
) -> YieldDecision {
    if ramp.distance > params.lookahead || ramp.distance <= 0.0 {
        return YieldDecision::Proceed;
    }
    let stopping = ramp.speed * ramp.speed / (2.0 * -limits.u_min) + 1.0;
    if stopping > ramp.distance {
        return YieldDecision::Proceed;
    }
    let conflicting =
        main_traffic.iter().filter(|m| m.distance > 0.0).any(|m| m.distance / m.speed.max(0.1) < params.critical_gap);
    if conflicting {
        YieldDecision::Yield
    } else {
        YieldDecision::Proceed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (CarFollowingParams, VehicleParams) {
        (CarFollowingParams::default(), VehicleParams::default())
    }

    #[test]
    fn free_flow_equilibrium() {
        let (cf, lim) = setup();
        assert!(car_following_accel(cf.desired_speed, None, &cf, &lim).abs() < 1e-12);
        assert!(car_following_accel(10.0, None, &cf, &lim) > 0.0);
    }

    #[test]
    fn standstill_behind_stopped_leader() {
        let (cf, lim) = setup();
        let acc = car_following_accel(0.0, Some(Lead { gap: cf.jam_distance, speed: 0.0 }), &cf, &lim);
        assert!(acc <= 0.0);
    }

    #[test]
    fn closing_on_slower_leader_brakes() {
        let (cf, lim) = setup();
        let acc = car_following_accel(15.0, Some(Lead { gap: 20.0, speed: 10.0 }), &cf, &lim);
        assert!(acc < 0.0);
        assert!(acc >= lim.u_min);
    }

    #[test]
    fn equilibrium_gap_gives_zero_accel() {
        let (cf, lim) = setup();
        let v = 12.0;
        let acc = car_following_accel(v, Some(Lead { gap: cf.equilibrium_gap(v), speed: v }), &cf, &lim);
        assert!(acc.abs() < 1e-9);
    }

    #[test]
    fn yield_examples() {
        let (cf, lim) = setup();
        let ramp = Approach { distance: 100.0, speed: 10.0 };
        assert_eq!(yield_decision(ramp, &[], &cf, &lim), YieldDecision::Proceed);
        let near = Approach { distance: 10.0, speed: 15.0 };
        assert_eq!(yield_decision(ramp, &[near], &cf, &lim), YieldDecision::Yield);
        let far = Approach { distance: 400.0, speed: 15.0 };
        assert_eq!(yield_decision(ramp, &[far], &cf, &lim), YieldDecision::Proceed);
    }

    #[test]
    fn committed_vehicle_proceeds() {
        let (cf, lim) = setup();
        // 16 m/s needs about 43 m to stop at 3 m/s².
        let ramp = Approach { distance: 30.0, speed: 16.0 };
        let near = Approach { distance: 10.0, speed: 15.0 };
        assert_eq!(yield_decision(ramp, &[near], &cf, &lim), YieldDecision::Proceed);
        let outside = Approach { distance: cf.lookahead + 1.0, speed: 10.0 };
        assert_eq!(yield_decision(outside, &[near], &cf, &lim), YieldDecision::Proceed);
    }
}
