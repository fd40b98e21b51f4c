use std::collections::{BTreeMap, VecDeque};

use crate::baseline::{car_following_accel, yield_decision, Approach, CarFollowingParams, Lead, YieldDecision};
use crate::coordinator::{Coordinator, CoordinatorError, DelayModel, PlatoonId};
use crate::follower::{follower_control_input, MemberInfoSet};
use crate::metrics::fuel_rate;
use crate::planner::{last_follower_exit, plan_leader, BindingConstraint, Plan, PlanError, PlanRequest};
use crate::scenario::{ArrivalEvent, Road, ScenarioConfig};
use crate::trajectory::{solve_boundary, Path};

use super::faults::ExitTimeOverride;
use super::monitor::{self, ExitRecord, Violation, ViolationKind};
use super::trace::{Event, Mode, SimTrace, TraceRecord, VehicleId, VehicleInfo};
use super::{EngineOptions, FollowerIntegration, PlanRecord, RunMode, SimError, SimRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Presence {
    Waiting,
    Active,
    Gone,
}

#[derive(Debug, Clone)]
struct Vehicle {
    info: VehicleInfo,
    /// Distance behind the platoon leader.
    offset: f64,
    presence: Presence,
    p: f64,
    v: f64,
    u: f64,
    mode: Mode,
    /// Coordinated follower advanced numerically rather than evaluated.
    integrated: bool,
    yielding: bool,
    entered: Option<f64>,
    exited: Option<f64>,
}

#[derive(Debug, Clone)]
struct PlatoonState {
    arrival: ArrivalEvent,
    members: Vec<VehicleId>,
    path: Path,
    t_plan: f64,
    tf: Option<f64>,
    tf_last: Option<f64>,
    leader_exit: Option<f64>,
    last_exit: Option<f64>,
    handed_off: bool,
}

impl PlatoonState {
    fn mode_at(&self, t: f64) -> Mode {
        if self.handed_off {
            return Mode::CarFollowing;
        }
        match self.tf {
            Some(_) if t < self.t_plan => Mode::CruisingDelay,
            Some(tf) if t <= tf => Mode::ExecutingPlan,
            Some(_) => Mode::PostExitCruise,
            None => Mode::CruisingDelay,
        }
    }
}

/// Human-driven entry waiting for its time and for room at the entrance.
#[derive(Debug, Clone)]
struct SpawnGroup {
    time: f64,
    members: Vec<VehicleId>,
    deferred: bool,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    id: usize,
    /// Distance to the conflict point; negative downstream.
    d: f64,
    v: f64,
}

/// Vehicles per lane, front first.
#[derive(Debug, Default)]
struct Lanes {
    approach: [Vec<Slot>; 2],
    downstream: Vec<Slot>,
}

/// The simulated network at one step.
pub struct World {
    config: ScenarioConfig,
    mode: RunMode,
    options: EngineOptions,
    dt: f64,
    step: u32,
    last_step: u32,
    vehicles: Vec<Vehicle>,
    platoons: Vec<PlatoonState>,
    arrivals: Vec<ArrivalEvent>,
    pending: [VecDeque<SpawnGroup>; 2],
    next_spawn: usize,
    next_plan: usize,
    active: Vec<VehicleId>,
    /// Coordinated platoons not yet handed off, in entry order.
    live: Vec<PlatoonId>,
    coordinator: Coordinator,
    exits: [Vec<ExitRecord>; 2],
    trace: SimTrace,
    plans: Vec<PlanRecord>,
    violations: Vec<Violation>,
    violation_index: BTreeMap<(ViolationKind, Vec<VehicleId>, Vec<PlatoonId>), usize>,
    deferred_entries: u32,
}

impl World {
    pub fn new(config: ScenarioConfig, mode: RunMode, options: EngineOptions, arrivals: Vec<ArrivalEvent>) -> Self {
        let spacing = config.member_spacing();
        let cf = config.car_following;
        let mut vehicles = Vec::new();
        let mut platoons = Vec::new();
        let mut pending: [VecDeque<SpawnGroup>; 2] = Default::default();
        for (idx, a) in arrivals.iter().enumerate() {
            let platoon = idx as PlatoonId;
            let mut members = Vec::new();
            for j in 0..a.size {
                let id = vehicles.len() as VehicleId;
                let integrated = mode == RunMode::Optimal
                    && j > 0
                    && (options.follower_integration == FollowerIntegration::Euler
                        || config.faults.follower_fault(platoon, j).is_some());
                vehicles.push(Vehicle {
                    info: VehicleInfo { id, platoon, member: j, road: a.road },
                    offset: j as f64 * spacing,
                    presence: Presence::Waiting,
                    p: 0.0,
                    v: a.entry_speed,
                    u: 0.0,
                    mode: if mode == RunMode::Optimal { Mode::CruisingDelay } else { Mode::CarFollowing },
                    integrated,
                    yielding: false,
                    entered: None,
                    exited: None,
                });
                members.push(id);
            }
            let queue = &mut pending[a.road.index()];
            match mode {
                RunMode::Baseline1 => {
                    // One by one, each at its own desired headway behind the previous.
                    let h = cf.desired_time_headway + (cf.jam_distance + config.vehicle.l_c) / a.entry_speed;
                    for (j, id) in members.iter().enumerate() {
                        vehicles[*id as usize].offset = 0.0;
                        queue.push_back(SpawnGroup {
                            time: a.entry_time + j as f64 * h,
                            members: vec![*id],
                            deferred: false,
                        });
                    }
                }
                RunMode::Baseline2 => {
                    queue.push_back(SpawnGroup { time: a.entry_time, members: members.clone(), deferred: false })
                }
                RunMode::Optimal => {}
            }
            platoons.push(PlatoonState {
                arrival: *a,
                members,
                path: Path::cruising(a.entry_time, 0.0, a.entry_speed),
                t_plan: a.entry_time + config.tau_max,
                tf: None,
                tf_last: None,
                leader_exit: None,
                last_exit: None,
                handed_off: mode != RunMode::Optimal,
            });
        }
        for queue in &mut pending {
            queue.make_contiguous().sort_by(|a, b| a.time.total_cmp(&b.time));
        }
        let dt = config.dt_sim;
        let last_step = (config.horizon / dt + 1e-9).floor() as u32;
        let trace = SimTrace {
            dt,
            vehicles: vehicles.iter().map(|v| v.info).collect(),
            records: Vec::new(),
            events: Vec::new(),
        };
        let coordinator = Coordinator::new(DelayModel::new(config.tau_min, config.tau_max));
        World {
            config,
            mode,
            options,
            dt,
            step: 0,
            last_step,
            vehicles,
            platoons,
            arrivals,
            pending,
            next_spawn: 0,
            next_plan: 0,
            active: Vec::new(),
            live: Vec::new(),
            coordinator,
            exits: Default::default(),
            trace,
            plans: Vec::new(),
            violations: Vec::new(),
            violation_index: BTreeMap::new(),
            deferred_entries: 0,
        }
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn is_done(&self) -> bool {
        self.step > self.last_step
    }

    pub fn active_vehicles(&self) -> usize {
        self.active.len()
    }

    /// Process due events, apply controls, check constraints, record, and
    /// advance by one step.
    pub fn step(&mut self) -> Result<(), SimError> {
        let t = self.time();
        self.process_events(t)?;
        self.update_coordinated(t);
        let lanes = self.lanes();
        self.update_human(&lanes);
        self.monitor(t, &lanes)?;
        self.record();
        self.advance(t)?;
        self.step += 1;
        Ok(())
    }

    pub fn finish(mut self) -> SimRun {
        self.trace.events.sort_by(|a, b| a.time().total_cmp(&b.time()));
        let unfinished = self.vehicles.iter().filter(|v| v.exited.is_none()).map(|v| v.info.id).collect();
        SimRun {
            mode: self.mode,
            config: self.config,
            arrivals: self.arrivals,
            trace: self.trace,
            plans: self.plans,
            violations: self.violations,
            unfinished,
            deferred_entries: self.deferred_entries,
        }
    }

    fn process_events(&mut self, t: f64) -> Result<(), SimError> {
        if self.mode != RunMode::Optimal {
            self.spawn_human(t);
            return Ok(());
        }
        // (timestamp, platoon, kind): entries before plans at equal times.
        let mut due: Vec<(f64, usize, u8)> = Vec::new();
        let mut s = self.next_spawn;
        while s < self.platoons.len() && self.platoons[s].arrival.entry_time <= t {
            due.push((self.platoons[s].arrival.entry_time, s, 0));
            s += 1;
        }
        let mut q = self.next_plan;
        while q < s && self.platoons[q].t_plan <= t {
            due.push((self.platoons[q].t_plan, q, 1));
            q += 1;
        }
        self.next_spawn = s;
        self.next_plan = q;
        due.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (_, idx, kind) in due {
            if kind == 0 {
                self.spawn_coordinated(idx, t)?;
            } else {
                self.plan(idx)?;
            }
        }
        Ok(())
    }

    fn spawn_coordinated(&mut self, idx: usize, t: f64) -> Result<(), SimError> {
        let a = self.platoons[idx].arrival;
        let platoon = idx as PlatoonId;
        let receipt = self.coordinator.register_entry(platoon, a.road, a.entry_time, a.size, a.entry_speed)?;
        self.trace.events.push(Event::PlatoonEntered {
            t: a.entry_time,
            platoon,
            road: a.road,
            size: a.size,
            speed: a.entry_speed,
        });
        self.trace.events.push(Event::RequestReceived { t: receipt, platoon });
        for &id in &self.platoons[idx].members {
            let veh = &mut self.vehicles[id as usize];
            veh.presence = Presence::Active;
            veh.p = a.entry_speed * (t - a.entry_time) - veh.offset;
            veh.v = a.entry_speed;
            veh.u = 0.0;
            if veh.p >= 0.0 {
                let te = a.entry_time + veh.offset / a.entry_speed;
                veh.entered = Some(te);
                self.trace.events.push(Event::VehicleEnteredZone { t: te, vehicle: id });
            }
            self.active.push(id);
        }
        self.live.push(platoon);
        Ok(())
    }

    fn spawn_human(&mut self, t: f64) {
        let l_c = self.config.vehicle.l_c;
        let jam = self.config.car_following.jam_distance;
        for road in Road::ALL {
            let zone = self.config.geometry.zone_length(road);
            while let Some(group) = self.pending[road.index()].front_mut() {
                if group.time > t {
                    break;
                }
                let lead = &self.vehicles[group.members[0] as usize];
                let speed = self.platoons[lead.info.platoon as usize].arrival.entry_speed;
                let fresh = !group.deferred && t - group.time < self.dt;
                let p_lead = if fresh { speed * (t - group.time) } else { 0.0 };
                let last = self
                    .active
                    .iter()
                    .map(|&id| &self.vehicles[id as usize])
                    .filter(|v| v.info.road == road && v.p < zone)
                    .min_by(|a, b| a.p.total_cmp(&b.p))
                    .map(|v| (v.p, v.v));
                if let Some((p_last, _)) = last {
                    if p_last - p_lead - l_c < jam {
                        if !group.deferred {
                            group.deferred = true;
                            self.deferred_entries += 1;
                        }
                        break;
                    }
                }
                // Enter no faster than allows stopping behind the stopping
                // point of the vehicle ahead at comfortable deceleration.
                let v0 = match last {
                    Some((p_last, v_last)) => {
                        let b = self.config.car_following.comfortable_decel;
                        let room = p_last - p_lead - l_c - jam;
                        let safe = (v_last * v_last + 2.0 * b * room).sqrt();
                        if fresh {
                            speed.min(safe)
                        } else {
                            speed.min(v_last).min(safe)
                        }
                    }
                    None => speed,
                };
                let group = self.pending[road.index()].pop_front().expect("front exists");
                for id in group.members {
                    let veh = &mut self.vehicles[id as usize];
                    veh.presence = Presence::Active;
                    veh.p = p_lead - veh.offset;
                    veh.v = v0;
                    veh.u = 0.0;
                    if veh.p >= 0.0 {
                        let te = if v0 > 0.0 { t - veh.p / v0 } else { t };
                        veh.entered = Some(te);
                        self.trace.events.push(Event::VehicleEnteredZone { t: te, vehicle: id });
                        if veh.info.member == 0 {
                            let a = self.platoons[veh.info.platoon as usize].arrival;
                            self.trace.events.push(Event::PlatoonEntered {
                                t: te,
                                platoon: veh.info.platoon,
                                road,
                                size: a.size,
                                speed: v0,
                            });
                        }
                    }
                    self.active.push(id);
                }
            }
        }
    }

    fn plan(&mut self, idx: usize) -> Result<(), SimError> {
        let platoon = idx as PlatoonId;
        let a = self.platoons[idx].arrival;
        let (t_plan, info, missing) = match self.coordinator.info_set_available_at(platoon) {
            Ok((t_plan, info)) => (t_plan, info, Vec::new()),
            Err(CoordinatorError::StaleSnapshot { missing, .. }) => {
                let (t_plan, info) = self.coordinator.snapshot(platoon)?;
                (t_plan, info, missing)
            }
            Err(e) => return Err(e.into()),
        };
        if !missing.is_empty() {
            self.trace.events.push(Event::StaleSnapshot { t: info.as_of, platoon, missing: missing.clone() });
        }
        let snapshot_as_of = info.as_of;
        let snapshot_predecessors = info.predecessors().len();
        let pf = self.config.geometry.conflict_position(a.road);
        let req = PlanRequest::after_cruise(
            info,
            a.entry_time,
            a.entry_speed,
            t_plan,
            pf,
            self.config.vehicle,
            self.config.delta,
            self.config.dt_search,
        );
        let planning = |source| SimError::Planning { platoon, t: t_plan, source };
        let (plan, binding) = match self.config.faults.override_for(platoon) {
            Some(o) => (forced_plan(&req, o).map_err(planning)?, None),
            None => {
                let plan = plan_leader(&req).map_err(planning)?;
                (plan, Some(plan.binding))
            }
        };
        let published_at = self.coordinator.publish_plan(platoon, plan.phi, plan.tf, plan.tf_last, t_plan)?;
        let state = &mut self.platoons[idx];
        state.path = Path::planned(a.entry_time, 0.0, a.entry_speed, &plan.phi);
        state.tf = Some(plan.tf);
        state.tf_last = Some(plan.tf_last);
        self.trace.events.push(Event::PlanComputed {
            t: t_plan,
            platoon,
            tf: plan.tf,
            tf_last: plan.tf_last,
            iterations: plan.iterations,
            binding,
        });
        self.trace.events.push(Event::PlanPublished { t: published_at, platoon });
        self.plans.push(PlanRecord {
            platoon,
            road: a.road,
            size: a.size,
            entry_time: a.entry_time,
            entry_speed: a.entry_speed,
            t_plan,
            p_plan: req.p_plan,
            window: req.window,
            tf: plan.tf,
            tf_last: plan.tf_last,
            phi: plan.phi,
            coefficients: plan.phi.absolute_coefficients(),
            iterations: plan.iterations,
            binding,
            published_at,
            snapshot_as_of,
            snapshot_predecessors,
            missing_predecessors: missing,
        });
        Ok(())
    }

    /// Coordinated vehicles take their state from the leader's path.
    fn update_coordinated(&mut self, t: f64) {
        for &id in &self.active {
            let veh = &mut self.vehicles[id as usize];
            let platoon = &self.platoons[veh.info.platoon as usize];
            let mode = platoon.mode_at(t);
            veh.mode = mode;
            if !mode.is_coordinated() {
                continue;
            }
            let lead = platoon.path.state(t);
            let info = MemberInfoSet { p_leader: lead.p, v_leader: lead.v, u_leader: lead.u };
            if veh.info.member == 0 {
                (veh.p, veh.v, veh.u) = (lead.p, lead.v, lead.u);
            } else if veh.integrated {
                let fault = self
                    .config
                    .faults
                    .follower_fault(veh.info.platoon, veh.info.member)
                    .map_or(0.0, |f| f.offset_at(t));
                veh.u = follower_control_input(&info) + fault;
            } else {
                veh.p = lead.p - veh.offset;
                veh.v = lead.v;
                veh.u = follower_control_input(&info);
            }
        }
    }

    fn lanes(&self) -> Lanes {
        let mut lanes = Lanes::default();
        for &id in &self.active {
            let veh = &self.vehicles[id as usize];
            let d = self.config.geometry.zone_length(veh.info.road) - veh.p;
            let slot = Slot { id: id as usize, d, v: veh.v };
            if d > 0.0 {
                lanes.approach[veh.info.road.index()].push(slot);
            } else {
                lanes.downstream.push(slot);
            }
        }
        let order = |a: &Slot, b: &Slot| a.d.total_cmp(&b.d).then(a.id.cmp(&b.id));
        lanes.approach.iter_mut().for_each(|l| l.sort_by(order));
        lanes.downstream.sort_by(order);
        lanes
    }

    /// Car following and the ramp priority rule for human-driven vehicles.
    fn update_human(&mut self, lanes: &Lanes) {
        let cf = self.config.car_following;
        let limits = self.config.vehicle;
        let l_c = limits.l_c;
        let platoon_cf =
            CarFollowingParams { desired_time_headway: cf.platoon_headway, jam_distance: self.config.delta, ..cf };

        // Individually entering vehicles never drive as a group.
        let grouped = self.mode != RunMode::Baseline1;

        let main: Vec<Approach> =
            lanes.approach[Road::Main.index()].iter().map(|s| Approach { distance: s.d, speed: s.v }).collect();
        for s in &lanes.approach[Road::Ramp.index()] {
            let veh = &mut self.vehicles[s.id];
            veh.yielding = !veh.mode.is_coordinated()
                && yield_decision(Approach { distance: s.d, speed: s.v }, &main, &cf, &limits) == YieldDecision::Yield;
        }

        let mut controls: Vec<(usize, f64)> = Vec::new();
        let mut leads: Vec<(Lead, &CarFollowingParams)> = Vec::new();
        let lane_list =
            Road::ALL.iter().map(|r| (Some(*r), &lanes.approach[r.index()])).chain([(None, &lanes.downstream)]);
        for (road, lane) in lane_list {
            for (idx, s) in lane.iter().enumerate() {
                let veh = &self.vehicles[s.id];
                if veh.mode.is_coordinated() {
                    continue;
                }
                leads.clear();
                let params_for = |other: usize| {
                    let o = &self.vehicles[other].info;
                    if grouped && o.platoon == veh.info.platoon && o.member + 1 == veh.info.member {
                        &platoon_cf
                    } else {
                        &cf
                    }
                };
                if idx > 0 {
                    let f = lane[idx - 1];
                    leads.push((Lead { gap: s.d - f.d - l_c, speed: f.v }, params_for(f.id)));
                }
                if let Some(road) = road {
                    if let Some(f) = lanes.downstream.last() {
                        leads.push((Lead { gap: s.d - f.d - l_c, speed: f.v }, params_for(f.id)));
                    }
                    if s.d <= cf.lookahead {
                        let other = road.other();
                        let cross = &lanes.approach[other.index()];
                        let k = cross.partition_point(|c| c.d < s.d);
                        let ahead =
                            cross[..k].iter().rev().find(|c| other == Road::Main || !self.vehicles[c.id].yielding);
                        if let Some(f) = ahead {
                            leads.push((Lead { gap: s.d - f.d - l_c, speed: f.v }, &cf));
                        }
                    }
                    if veh.yielding {
                        leads.push((Lead { gap: s.d, speed: 0.0 }, &cf));
                    }
                }
                let u = if leads.is_empty() {
                    car_following_accel(s.v, None, &cf, &limits)
                } else {
                    leads
                        .iter()
                        .map(|(lead, params)| car_following_accel(s.v, Some(*lead), params, &limits))
                        .fold(f64::INFINITY, f64::min)
                };
                controls.push((s.id, u));
            }
        }
        for (id, u) in controls {
            self.vehicles[id].u = u;
        }
    }

    fn monitor(&mut self, t: f64, lanes: &Lanes) -> Result<(), SimError> {
        let params = self.config.vehicle;
        let geometry = self.config.geometry;
        let in_zone = |v: &Vehicle| v.p >= 0.0 && v.p <= geometry.zone_length(v.info.road);
        let mut found = Vec::new();
        for &id in &self.active {
            let v = &self.vehicles[id as usize];
            let controlled = v.mode.is_coordinated() && in_zone(v);
            found.extend(monitor::check_bounds(t, id, v.info.platoon, v.v, v.u, controlled, &params));
        }
        if self.mode == RunMode::Optimal {
            let spacing = self.config.member_spacing();
            for road in Road::ALL {
                let mut ahead: Option<PlatoonId> = None;
                for &pid in self.live.iter().filter(|&&p| self.platoons[p as usize].arrival.road == road) {
                    let members = &self.platoons[pid as usize].members;
                    for w in members.windows(2) {
                        let (f, b) = (&self.vehicles[w[0] as usize], &self.vehicles[w[1] as usize]);
                        found.extend(monitor::check_member_gap(t, pid, (w[0], f.p), (w[1], b.p), spacing));
                    }
                    if let Some(k) = ahead {
                        let tail_id = *self.platoons[k as usize].members.last().expect("non-empty platoon");
                        let (tail, lead) = (&self.vehicles[tail_id as usize], &self.vehicles[members[0] as usize]);
                        if in_zone(tail) && in_zone(lead) {
                            found.extend(monitor::check_rear_end(
                                t,
                                (tail_id, k, tail.p),
                                (members[0], pid, lead.p, lead.v),
                                &params,
                            ));
                        }
                    }
                    ahead = Some(pid);
                }
            }
        }
        let info = |s: &Slot| (s.id as VehicleId, self.vehicles[s.id].info.platoon, -s.d);
        for lane in lanes.approach.iter().chain([&lanes.downstream]) {
            for w in lane.windows(2) {
                found.extend(monitor::check_overlap(t, info(&w[0]), info(&w[1]), params.l_c));
            }
        }
        self.report(t, found)
    }

    fn report(&mut self, t: f64, found: Vec<Violation>) -> Result<(), SimError> {
        if found.is_empty() {
            return Ok(());
        }
        if !self.options.audit_only {
            return Err(SimError::ConstraintViolation { t, violations: found });
        }
        for v in found {
            let key = (v.kind, v.vehicles.clone(), v.platoons.clone());
            match self.violation_index.get(&key) {
                Some(&i) => self.violations[i].occurrences += 1,
                None => {
                    self.violation_index.insert(key, self.violations.len());
                    self.violations.push(v);
                }
            }
        }
        Ok(())
    }

    fn record(&mut self) {
        for &id in &self.active {
            let v = &self.vehicles[id as usize];
            self.trace.records.push(TraceRecord {
                step: self.step,
                vehicle: id,
                mode: v.mode,
                p: v.p,
                v: v.v,
                u: v.u,
                fuel_rate: fuel_rate(v.v, v.u, &self.config.fuel),
            });
        }
    }

    fn advance(&mut self, t: f64) -> Result<(), SimError> {
        let t1 = (self.step + 1) as f64 * self.dt;
        let v_max = self.config.vehicle.v_max;
        let geometry = self.config.geometry;
        let mut exits: Vec<(VehicleId, f64)> = Vec::new();
        for &id in &self.active {
            let veh = &mut self.vehicles[id as usize];
            let path = &self.platoons[veh.info.platoon as usize].path;
            let exact = veh.mode.is_coordinated() && !veh.integrated;
            let p0 = veh.p;
            if exact {
                let s = path.state(t1);
                veh.p = s.p - veh.offset;
                veh.v = s.v;
            } else {
                let mut v = veh.v + veh.u * self.dt;
                if !veh.mode.is_coordinated() {
                    v = v.clamp(0.0, v_max);
                }
                veh.v = v;
                veh.p += v * self.dt;
            }
            let p1 = veh.p;
            let offset = veh.offset;
            let crossing = |target: f64| {
                if exact {
                    path.crossing_time(target + offset, t, t1).unwrap_or(t1)
                } else {
                    t + self.dt * (target - p0) / (p1 - p0)
                }
            };
            if veh.entered.is_none() && p0 < 0.0 && p1 >= 0.0 {
                let te = crossing(0.0);
                veh.entered = Some(te);
                self.trace.events.push(Event::VehicleEnteredZone { t: te, vehicle: id });
            }
            let zone = geometry.zone_length(veh.info.road);
            if veh.exited.is_none() && p0 < zone && p1 >= zone {
                let te = crossing(zone);
                veh.exited = Some(te);
                self.trace.events.push(Event::VehicleExitedZone { t: te, vehicle: id });
                exits.push((id, te));
            }
            if p1 - zone > geometry.downstream_length {
                veh.presence = Presence::Gone;
                self.trace.events.push(Event::LeftNetwork { t: t1, vehicle: id });
            }
        }
        self.active.retain(|&id| self.vehicles[id as usize].presence == Presence::Active);

        let mut lateral = Vec::new();
        for (id, te) in exits {
            let info = self.vehicles[id as usize].info;
            let state = &mut self.platoons[info.platoon as usize];
            if info.member == 0 {
                state.leader_exit = Some(te);
                self.trace.events.push(Event::LeaderExited { t: te, platoon: info.platoon, road: info.road });
            }
            if info.member + 1 == state.arrival.size {
                state.last_exit = Some(te);
                self.trace.events.push(Event::LastFollowerExited { t: te, platoon: info.platoon, road: info.road });
                if let (RunMode::Optimal, Some(leader)) = (self.mode, state.leader_exit) {
                    let rec = ExitRecord { platoon: info.platoon, leader, last: te };
                    for k in &self.exits[info.road.other().index()] {
                        lateral.extend(monitor::check_lateral(te, rec, *k, self.config.vehicle.t_h));
                    }
                    self.exits[info.road.index()].push(rec);
                }
            }
        }
        self.report(t1, lateral)?;

        if self.mode == RunMode::Optimal {
            let mut done = Vec::new();
            for &pid in &self.live {
                let state = &self.platoons[pid as usize];
                let ready = state.last_exit.is_some() && state.tf_last.is_some_and(|tl| tl <= t1 + 1e-9);
                if ready {
                    done.push(pid);
                }
            }
            for pid in done {
                self.coordinator.remove_exited(pid, t1)?;
                self.platoons[pid as usize].handed_off = true;
                self.live.retain(|&p| p != pid);
                self.trace.events.push(Event::HandedOff { t: t1, platoon: pid });
            }
        }
        Ok(())
    }
}

/// Plan with a prescribed exit time, skipping the safety search.
fn forced_plan(req: &PlanRequest, o: ExitTimeOverride) -> Result<Plan, PlanError> {
    let w = req.window;
    let tf = match o {
        ExitTimeOverride::WindowLower => w.t_lower,
        ExitTimeOverride::WindowUpper => w.t_upper,
        ExitTimeOverride::Absolute(tf) => tf,
        ExitTimeOverride::Offset(d) => w.t_lower + d,
    };
    let phi = solve_boundary(&req.boundary(tf))?;
    let v_tf = phi.eval_unchecked(tf).v;
    let tf_last = last_follower_exit(tf, v_tf, req.size, req.delta, req.params.l_c)?;
    Ok(Plan { tf, phi, tf_last, iterations: 0, binding: BindingConstraint::Window })
}
