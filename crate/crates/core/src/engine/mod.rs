//! Fixed-step simulation of the merge: entry, cruise during the delay,
//! planning, plan execution, handoff to car following, with online
//! constraint monitors.

mod faults;
mod monitor;
mod trace;
mod world;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use faults::{ExitTimeOverride, FaultPlan, FollowerFault, PlanOverride};
pub use monitor::{
    check_bounds, check_lateral, check_member_gap, check_overlap, check_rear_end, ExitRecord, Violation, ViolationKind,
    TOLERANCE,
};
pub use trace::{Event, Mode, SimTrace, TraceRecord, VehicleId, VehicleInfo};
pub use world::World;

use crate::coordinator::{CoordinatorError, PlatoonId};
use crate::planner::{BindingConstraint, PlanError};
use crate::scenario::{generate_arrivals, ArrivalEvent, Road, ScenarioConfig, ScenarioError};
use crate::trajectory::{FeasibleWindow, TrajectoryPolynomial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    /// Human drivers entering one by one.
    Baseline1,
    /// Human drivers entering as pre-formed platoons.
    Baseline2,
    /// Coordinated platoons.
    Optimal,
}

impl RunMode {
    pub const ALL: [RunMode; 3] = [RunMode::Baseline1, RunMode::Baseline2, RunMode::Optimal];

    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Baseline1 => "baseline1",
            RunMode::Baseline2 => "baseline2",
            RunMode::Optimal => "optimal",
        }
    }
}

impl std::fmt::Display for RunMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How platoon followers are advanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FollowerIntegration {
    /// Evaluate the leader's polynomial and shift by the member offset.
    #[default]
    Exact,
    /// Integrate the replicated control with semi-implicit Euler.
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EngineOptions {
    /// Record violations and keep going instead of aborting.
    pub audit_only: bool,
    pub follower_integration: FollowerIntegration,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ScenarioError),
    #[error("planning failed for platoon {platoon} at t={t}: {source}")]
    Planning {
        platoon: PlatoonId,
        t: f64,
        #[source]
        source: PlanError,
    },
    #[error(transparent)]
    Coordinator(#[from] CoordinatorError),
    #[error("{} constraint violation(s) at t={t}, first: {}", violations.len(), violations[0].detail)]
    ConstraintViolation { t: f64, violations: Vec<Violation> },
}

impl SimError {
    /// Machine-readable form for reports.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        match self {
            SimError::Config(e) => json!({ "error": "config", "message": e.to_string() }),
            SimError::Planning { platoon, t, source } => {
                let binding = match source {
                    PlanError::Infeasible { binding, margin, .. } => json!({ "constraint": binding, "margin": margin }),
                    PlanError::EmptyWindow { .. } => json!({ "constraint": "window" }),
                    _ => serde_json::Value::Null,
                };
                json!({
                    "error": "planning_infeasible",
                    "platoon": platoon,
                    "t": t,
                    "binding": binding,
                    "message": source.to_string(),
                })
            }
            SimError::Coordinator(e) => json!({ "error": "coordinator", "message": e.to_string() }),
            SimError::ConstraintViolation { t, violations } => {
                json!({ "error": "constraint_violation", "t": t, "violations": violations })
            }
        }
    }
}

/// Audit record of one leader plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub platoon: PlatoonId,
    pub road: Road,
    pub size: u32,
    pub entry_time: f64,
    pub entry_speed: f64,
    pub t_plan: f64,
    pub p_plan: f64,
    pub window: FeasibleWindow,
    pub tf: f64,
    pub tf_last: f64,
    pub phi: TrajectoryPolynomial,
    /// `[a, b, c, d]` in absolute time.
    pub coefficients: [f64; 4],
    pub iterations: u32,
    /// `None` when the exit time was forced by a fault override.
    pub binding: Option<BindingConstraint>,
    pub published_at: f64,
    /// When the leader's request reached the coordinator.
    pub snapshot_as_of: f64,
    pub snapshot_predecessors: usize,
    /// Predecessors whose plan was not visible in the snapshot.
    pub missing_predecessors: Vec<PlatoonId>,
}

/// Everything one run produced.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub mode: RunMode,
    pub config: ScenarioConfig,
    pub arrivals: Vec<ArrivalEvent>,
    pub trace: SimTrace,
    pub plans: Vec<PlanRecord>,
    pub violations: Vec<Violation>,
    /// Vehicles still upstream of or inside the zone at the horizon.
    pub unfinished: Vec<VehicleId>,
    /// Human-driven entries postponed because the entry point was blocked.
    pub deferred_entries: u32,
}

/// Generate arrivals from the config and simulate one mode.
pub fn run(config: &ScenarioConfig, mode: RunMode, options: &EngineOptions) -> Result<SimRun, SimError> {
    config.validate()?;
    let arrivals = generate_arrivals(config)?;
    run_with_arrivals(config, mode, options, arrivals)
}

/// Simulate one mode on a given arrival list.
pub fn run_with_arrivals(
    config: &ScenarioConfig,
    mode: RunMode,
    options: &EngineOptions,
    arrivals: Vec<ArrivalEvent>,
) -> Result<SimRun, SimError> {
    let mut world = World::new(config.clone(), mode, *options, arrivals);
    while !world.is_done() {
        world.step()?;
    }
    Ok(world.finish())
}
