//! Deliberate deviations from nominal operation, used to show that the
//! monitors and analysis checks catch what they claim to catch.

use serde::{Deserialize, Serialize};

use crate::coordinator::PlatoonId;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultPlan {
    /// Replace the planner's exit time for some platoons; the safety search
    /// is skipped for them.
    pub plan_overrides: Vec<PlanOverride>,
    /// Add a constant to one follower's control for a while.
    pub follower_faults: Vec<FollowerFault>,
}

impl FaultPlan {
    pub fn is_empty(&self) -> bool {
        self.plan_overrides.is_empty() && self.follower_faults.is_empty()
    }

    pub fn override_for(&self, platoon: PlatoonId) -> Option<ExitTimeOverride> {
        self.plan_overrides.iter().find(|o| o.platoon == platoon).map(|o| o.exit_time)
    }

    pub fn follower_fault(&self, platoon: PlatoonId, member: u32) -> Option<&FollowerFault> {
        self.follower_faults.iter().find(|f| f.platoon == platoon && f.member == member)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanOverride {
    pub platoon: PlatoonId,
    pub exit_time: ExitTimeOverride,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitTimeOverride {
    WindowLower,
    WindowUpper,
    /// Absolute exit time.
    Absolute(f64),
    /// Shift relative to the window's lower end.
    Offset(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FollowerFault {
    pub platoon: PlatoonId,
    pub member: u32,
    /// Added control, m/s².
    pub accel_offset: f64,
    pub start: f64,
    pub duration: f64,
}

impl FollowerFault {
    pub fn offset_at(&self, t: f64) -> f64 {
        if t >= self.start && t < self.start + self.duration {
            self.accel_offset
        } else {
            0.0
        }
    }
}
