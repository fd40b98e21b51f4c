use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coordinator::PlatoonId;
use crate::planner::BindingConstraint;
use crate::scenario::Road;

pub type VehicleId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    CruisingDelay,
    ExecutingPlan,
    PostExitCruise,
    CarFollowing,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::CruisingDelay => "cruising_delay",
            Mode::ExecutingPlan => "executing_plan",
            Mode::PostExitCruise => "post_exit_cruise",
            Mode::CarFollowing => "car_following",
        }
    }

    /// Whether the vehicle is under coordinated (leader-replicating) control.
    pub fn is_coordinated(self) -> bool {
        !matches!(self, Mode::CarFollowing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleInfo {
    pub id: VehicleId,
    pub platoon: PlatoonId,
    /// Index within the platoon; 0 is the leader.
    pub member: u32,
    pub road: Road,
}

/// One vehicle at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub step: u32,
    pub vehicle: VehicleId,
    pub mode: Mode,
    pub p: f64,
    pub v: f64,
    pub u: f64,
    pub fuel_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    PlatoonEntered {
        t: f64,
        platoon: PlatoonId,
        road: Road,
        size: u32,
        speed: f64,
    },
    RequestReceived {
        t: f64,
        platoon: PlatoonId,
    },
    PlanComputed {
        t: f64,
        platoon: PlatoonId,
        tf: f64,
        tf_last: f64,
        iterations: u32,
        binding: Option<BindingConstraint>,
    },
    PlanPublished {
        t: f64,
        platoon: PlatoonId,
    },
    StaleSnapshot {
        t: f64,
        platoon: PlatoonId,
        missing: Vec<PlatoonId>,
    },
    VehicleEnteredZone {
        t: f64,
        vehicle: VehicleId,
    },
    VehicleExitedZone {
        t: f64,
        vehicle: VehicleId,
    },
    LeaderExited {
        t: f64,
        platoon: PlatoonId,
        road: Road,
    },
    LastFollowerExited {
        t: f64,
        platoon: PlatoonId,
        road: Road,
    },
    HandedOff {
        t: f64,
        platoon: PlatoonId,
    },
    LeftNetwork {
        t: f64,
        vehicle: VehicleId,
    },
}

impl Event {
    pub fn time(&self) -> f64 {
        match self {
            Event::PlatoonEntered { t, .. }
            | Event::RequestReceived { t, .. }
            | Event::PlanComputed { t, .. }
            | Event::PlanPublished { t, .. }
            | Event::StaleSnapshot { t, .. }
            | Event::VehicleEnteredZone { t, .. }
            | Event::VehicleExitedZone { t, .. }
            | Event::LeaderExited { t, .. }
            | Event::LastFollowerExited { t, .. }
            | Event::HandedOff { t, .. }
            | Event::LeftNetwork { t, .. } => *t,
        }
    }
}

/// Per-step records and the event log of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimTrace {
    pub dt: f64,
    pub vehicles: Vec<VehicleInfo>,
    /// Step-major: all records of a step are contiguous and steps increase.
    pub records: Vec<TraceRecord>,
    pub events: Vec<Event>,
}

impl SimTrace {
    pub fn time(&self, step: u32) -> f64 {
        step as f64 * self.dt
    }

    pub fn vehicle(&self, id: VehicleId) -> &VehicleInfo {
        &self.vehicles[id as usize]
    }

    /// Records grouped by step.
    pub fn steps(&self) -> impl Iterator<Item = &[TraceRecord]> {
        self.records.chunk_by(|a, b| a.step == b.step)
    }

    pub fn vehicle_records(&self, id: VehicleId) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(move |r| r.vehicle == id)
    }

    /// Per-vehicle record lists, indexed by vehicle id.
    pub fn by_vehicle(&self) -> Vec<Vec<TraceRecord>> {
        let mut out = vec![Vec::new(); self.vehicles.len()];
        for r in &self.records {
            out[r.vehicle as usize].push(*r);
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "id", "platoon", "j", "road", "mode", "p", "v", "u", "fuel_rate"])?;
        for r in &self.records {
            let info = self.vehicle(r.vehicle);
            w.write_record([
                self.time(r.step).to_string(),
                r.vehicle.to_string(),
                info.platoon.to_string(),
                info.member.to_string(),
                info.road.to_string(),
                r.mode.as_str().to_string(),
                r.p.to_string(),
                r.v.to_string(),
                r.u.to_string(),
                r.fuel_rate.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
