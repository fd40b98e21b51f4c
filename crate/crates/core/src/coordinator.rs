//! The coordinator: a passive store of entry records and published plans
//! with a worst-case bidirectional delay model.
//!
//! A leader's request reaches the coordinator half a delay bound after entry,
//! the reply reaches the leader a full bound after entry, and the plan the
//! leader then computes becomes visible one and a half bounds after entry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::Road;
use crate::trajectory::TrajectoryPolynomial;

pub type PlatoonId = u32;

/// Slack for comparing derived timestamps.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoordinatorError {
    #[error("platoon {0} is already registered")]
    DuplicatePlatoon(PlatoonId),
    #[error("platoon {0} is not registered")]
    UnknownPlatoon(PlatoonId),
    #[error("platoon {0} already published a plan")]
    AlreadyPublished(PlatoonId),
    #[error("platoon {platoon} published at {at} before its planning time {t_plan}")]
    PublishedEarly { platoon: PlatoonId, at: f64, t_plan: f64 },
    #[error("platoon {platoon} has not exited yet (last follower exits at {tf_last:?}, now {t})")]
    NotExited { platoon: PlatoonId, t: f64, tf_last: Option<f64> },
    #[error("queue is empty")]
    EmptyQueue,
    #[error("stale snapshot for platoon {platoon}: predecessor plans {missing:?} not yet visible at {receipt}")]
    StaleSnapshot { platoon: PlatoonId, receipt: f64, missing: Vec<PlatoonId> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    pub tau_min: f64,
    pub tau_max: f64,
}

impl DelayModel {
    pub fn new(tau_min: f64, tau_max: f64) -> Self {
        DelayModel { tau_min, tau_max }
    }

    /// Worst-case one-way latency.
    pub fn one_way(&self) -> f64 {
        0.5 * self.tau_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PublishedPlan {
    pub phi: TrajectoryPolynomial,
    pub tf: f64,
    pub tf_last: f64,
    pub planned_at: f64,
    pub published_at: f64,
}

/// What the coordinator knows about one platoon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoEntry {
    pub platoon: PlatoonId,
    pub road: Road,
    pub size: u32,
    pub entry_time: f64,
    pub plan: Option<PublishedPlan>,
    pub archived: bool,
}

/// Immutable snapshot handed to a leader: every predecessor in queue order
/// (archived ones included, for lateral checks), followed by the owner's
/// own entry record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatoonInfoSet {
    pub owner: PlatoonId,
    /// Time the request reached the coordinator; plans published later are absent.
    pub as_of: f64,
    pub entries: Vec<InfoEntry>,
}

impl PlatoonInfoSet {
    pub fn own(&self) -> &InfoEntry {
        self.entries.last().expect("snapshot always holds the owner")
    }

    pub fn predecessors(&self) -> &[InfoEntry] {
        &self.entries[..self.entries.len() - 1]
    }

    /// Most recent same-road predecessor, which is physically in front.
    pub fn road_predecessor(&self) -> Option<&InfoEntry> {
        let road = self.own().road;
        self.predecessors().iter().rev().find(|e| e.road == road)
    }

    pub fn phis(&self) -> Vec<TrajectoryPolynomial> {
        self.predecessors().iter().filter_map(|e| e.plan.map(|p| p.phi)).collect()
    }

    pub fn sizes(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.size).collect()
    }

    pub fn entry_times(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.entry_time).collect()
    }

    pub fn exit_times(&self) -> Vec<f64> {
        self.predecessors().iter().filter_map(|e| e.plan.map(|p| p.tf)).collect()
    }
}

#[derive(Debug, Clone)]
struct Record {
    road: Road,
    size: u32,
    entry_time: f64,
    entry_speed: f64,
    plan: Option<PublishedPlan>,
    archived: bool,
}

#[derive(Debug, Clone)]
pub struct Coordinator {
    delay: DelayModel,
    records: BTreeMap<PlatoonId, Record>,
    /// Registration order, archived platoons included.
    order: Vec<PlatoonId>,
    /// Platoons currently in the control zone.
    queue: Vec<PlatoonId>,
}

impl Coordinator {
    pub fn new(delay: DelayModel) -> Self {
        Coordinator { delay, records: BTreeMap::new(), order: Vec::new(), queue: Vec::new() }
    }

    pub fn delay(&self) -> DelayModel {
        self.delay
    }

    pub fn queue(&self) -> &[PlatoonId] {
        &self.queue
    }

    /// Append a platoon to the queue; returns when its request lands.
    pub fn register_entry(
        &mut self,
        platoon: PlatoonId,
        road: Road,
        t0: f64,
        size: u32,
        v0: f64,
    ) -> Result<f64, CoordinatorError> {
        if self.records.contains_key(&platoon) {
            return Err(CoordinatorError::DuplicatePlatoon(platoon));
        }
        self.records
            .insert(platoon, Record { road, size, entry_time: t0, entry_speed: v0, plan: None, archived: false });
        self.order.push(platoon);
        self.queue.push(platoon);
        Ok(t0 + self.delay.one_way())
    }

    pub fn entry_speed(&self, platoon: PlatoonId) -> Option<f64> {
        self.records.get(&platoon).map(|r| r.entry_speed)
    }

    /// Planning time `t0 + tau_max` and the snapshot the leader receives.
    ///
    /// The snapshot holds exactly the plans published by the time the
    /// request reached the coordinator. A predecessor without a visible plan
    /// means the entry spacing was violated and is reported as stale.
    pub fn info_set_available_at(&self, platoon: PlatoonId) -> Result<(f64, PlatoonInfoSet), CoordinatorError> {
        let (t_plan, info) = self.snapshot(platoon)?;
        let missing: Vec<PlatoonId> =
            info.predecessors().iter().filter(|e| e.plan.is_none()).map(|e| e.platoon).collect();
        if !missing.is_empty() {
            return Err(CoordinatorError::StaleSnapshot { platoon, receipt: info.as_of, missing });
        }
        Ok((t_plan, info))
    }

    /// Same snapshot without the staleness check.
    pub fn snapshot(&self, platoon: PlatoonId) -> Result<(f64, PlatoonInfoSet), CoordinatorError> {
        let own = self.records.get(&platoon).ok_or(CoordinatorError::UnknownPlatoon(platoon))?;
        let receipt = own.entry_time + self.delay.one_way();
        let t_plan = own.entry_time + self.delay.tau_max;
        let mut entries = Vec::new();
        for id in &self.order {
            if *id == platoon {
                break;
            }
            let r = &self.records[id];
            entries.push(InfoEntry {
                platoon: *id,
                road: r.road,
                size: r.size,
                entry_time: r.entry_time,
                plan: r.plan.filter(|p| p.published_at <= receipt + TIME_EPS),
                archived: r.archived,
            });
        }
        entries.push(InfoEntry {
            platoon,
            road: own.road,
            size: own.size,
            entry_time: own.entry_time,
            plan: None,
            archived: own.archived,
        });
        Ok((t_plan, PlatoonInfoSet { owner: platoon, as_of: receipt, entries }))
    }

    /// Store a plan computed at `planned_at`; returns its publication time
    /// `t0 + 1.5·tau_max`.
    pub fn publish_plan(
        &mut self,
        platoon: PlatoonId,
        phi: TrajectoryPolynomial,
        tf: f64,
        tf_last: f64,
        planned_at: f64,
    ) -> Result<f64, CoordinatorError> {
        let delay = self.delay;
        let record = self.records.get_mut(&platoon).ok_or(CoordinatorError::UnknownPlatoon(platoon))?;
        if record.plan.is_some() {
            return Err(CoordinatorError::AlreadyPublished(platoon));
        }
        let t_plan = record.entry_time + delay.tau_max;
        if planned_at + TIME_EPS < t_plan {
            return Err(CoordinatorError::PublishedEarly { platoon, at: planned_at, t_plan });
        }
        let published_at = record.entry_time + 1.5 * delay.tau_max;
        record.plan = Some(PublishedPlan { phi, tf, tf_last, planned_at, published_at });
        Ok(published_at)
    }

    /// Drop a platoon whose last follower has left the control zone. The
    /// record stays archived for later lateral checks and metrics.
    pub fn remove_exited(&mut self, platoon: PlatoonId, t: f64) -> Result<&[PlatoonId], CoordinatorError> {
        if self.queue.is_empty() {
            return Err(CoordinatorError::EmptyQueue);
        }
        let pos = self.queue.iter().position(|id| *id == platoon).ok_or(CoordinatorError::UnknownPlatoon(platoon))?;
        let record = self.records.get_mut(&platoon).expect("queued platoons have records");
        let tf_last = record.plan.map(|p| p.tf_last);
        match tf_last {
            Some(tl) if tl <= t + TIME_EPS => {}
            _ => return Err(CoordinatorError::NotExited { platoon, t, tf_last }),
        }
        record.archived = true;
        self.queue.remove(pos);
        Ok(&self.queue)
    }

    pub fn is_archived(&self, platoon: PlatoonId) -> bool {
        self.records.get(&platoon).is_some_and(|r| r.archived)
    }
}
