//! Road geometry, vehicle limits, scenario configuration and seeded
//! platoon arrival generation.

use std::fmt;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::CarFollowingParams;
use crate::engine::FaultPlan;
use crate::metrics::FuelModelCoefficients;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("infeasible {road} arrivals: {binding}")]
    Infeasible { road: Road, binding: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Road {
    Main,
    Ramp,
}

impl Road {
    pub const ALL: [Road; 2] = [Road::Main, Road::Ramp];

    pub fn other(self) -> Road {
        match self {
            Road::Main => Road::Ramp,
            Road::Ramp => Road::Main,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Road {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Road::Main => "main",
            Road::Ramp => "ramp",
        })
    }
}

/// Both approaches measure position from their control-zone entry; the
/// conflict point sits at the zone exit of each road. Past it, both roads
/// feed a single downstream lane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadGeometry {
    pub main_zone_length: f64,
    pub ramp_zone_length: f64,
    /// Length of the merged lane kept in the simulation after the conflict point.
    pub downstream_length: f64,
}

impl Default for RoadGeometry {
    fn default() -> Self {
        RoadGeometry { main_zone_length: 560.0, ramp_zone_length: 560.0, downstream_length: 300.0 }
    }
}

impl RoadGeometry {
    pub fn zone_length(&self, road: Road) -> f64 {
        match road {
            Road::Main => self.main_zone_length,
            Road::Ramp => self.ramp_zone_length,
        }
    }

    /// Position of the conflict point in the road's own coordinate.
    pub fn conflict_position(&self, road: Road) -> f64 {
        self.zone_length(road)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        positive("geometry.main_zone_length", self.main_zone_length)?;
        positive("geometry.ramp_zone_length", self.ramp_zone_length)?;
        positive("geometry.downstream_length", self.downstream_length)
    }
}

/// Kinematic limits and safety parameters shared by every automated vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Vehicle length.
    pub l_c: f64,
    /// Standstill distance of the speed-dependent rear-end gap.
    pub gamma: f64,
    /// Reaction time of the speed-dependent rear-end gap.
    pub phi: f64,
    /// Minimum time headway between cross-road exits.
    pub t_h: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams { u_min: -3.0, u_max: 3.0, v_min: 5.0, v_max: 16.67, l_c: 5.0, gamma: 3.0, phi: 0.5, t_h: 1.5 }
    }
}

impl VehicleParams {
    /// Speed-dependent safe distance `γ + φ·v`.
    pub fn safe_distance(&self, v: f64) -> f64 {
        self.gamma + self.phi * v
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.u_min < 0.0 && self.u_max > 0.0) {
            return Err(invalid(
                "vehicle.u_min/u_max",
                format!("need u_min < 0 < u_max, got {} / {}", self.u_min, self.u_max),
            ));
        }
        if !(self.v_min > 0.0 && self.v_min < self.v_max) {
            return Err(invalid(
                "vehicle.v_min/v_max",
                format!("need 0 < v_min < v_max, got {} / {}", self.v_min, self.v_max),
            ));
        }
        positive("vehicle.l_c", self.l_c)?;
        positive("vehicle.gamma", self.gamma)?;
        positive("vehicle.phi", self.phi)?;
        positive("vehicle.t_h", self.t_h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeChoice {
    pub size: u32,
    pub probability: f64,
}

/// An arrival given explicitly in the config instead of being sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalSpec {
    pub road: Road,
    pub entry_time: f64,
    pub entry_speed: f64,
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub rng_seed: u64,
    /// Simulated duration; arrivals are generated on `[0, horizon)`.
    pub horizon: f64,
    pub dt_sim: f64,
    /// Exit-time increment of the leader's search.
    pub dt_search: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    /// Vehicles per hour.
    pub main_volume: f64,
    pub ramp_volume: f64,
    pub platoon_sizes: Vec<SizeChoice>,
    pub entry_speed_range: [f64; 2],
    /// Bumper-to-bumper gap inside a platoon.
    pub delta: f64,
    pub geometry: RoadGeometry,
    pub vehicle: VehicleParams,
    pub car_following: CarFollowingParams,
    pub fuel: FuelModelCoefficients,
    /// Replaces sampled arrivals when present.
    pub arrivals: Option<Vec<ArrivalSpec>>,
    pub faults: FaultPlan,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let third = 1.0 / 3.0;
        ScenarioConfig {
            name: "onramp_560m".into(),
            rng_seed: 42,
            horizon: 3600.0,
            dt_sim: 0.05,
            dt_search: 0.1,
            tau_min: 0.1,
            tau_max: 0.5,
            main_volume: 700.0,
            ramp_volume: 650.0,
            platoon_sizes: vec![
                SizeChoice { size: 2, probability: third },
                SizeChoice { size: 3, probability: third },
                SizeChoice { size: 4, probability: third },
            ],
            entry_speed_range: [13.89, 16.67],
            delta: 2.0,
            geometry: RoadGeometry::default(),
            vehicle: VehicleParams::default(),
            car_following: CarFollowingParams::default(),
            fuel: FuelModelCoefficients::default(),
            arrivals: None,
            faults: FaultPlan::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ScenarioError> {
        let config: ScenarioConfig = toml::from_str(text)
            .map_err(|e| ScenarioError::Parse { path: origin.to_string(), message: e.to_string() })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: shown.clone(), source })?;
        Self::from_toml_str(&text, &shown)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.geometry.validate()?;
        self.vehicle.validate()?;
        self.car_following.validate(&self.vehicle)?;
        self.fuel.validate(&self.vehicle)?;
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", format!("must be finite and non-negative, got {}", self.horizon)));
        }
        positive("dt_sim", self.dt_sim)?;
        positive("dt_search", self.dt_search)?;
        if !(self.tau_min >= 0.0 && self.tau_min <= self.tau_max && self.tau_max.is_finite()) {
            return Err(invalid(
                "tau_min/tau_max",
                format!("need 0 <= tau_min <= tau_max, got {} / {}", self.tau_min, self.tau_max),
            ));
        }
        if !(self.main_volume >= 0.0 && self.ramp_volume >= 0.0) {
            return Err(invalid("main_volume/ramp_volume", "volumes must be non-negative".into()));
        }
        positive("delta", self.delta)?;
        let [lo, hi] = self.entry_speed_range;
        if !(lo <= hi && lo >= self.vehicle.v_min && hi <= self.vehicle.v_max) {
            return Err(invalid(
                "entry_speed_range",
                format!("[{lo}, {hi}] must be ordered and inside [{}, {}]", self.vehicle.v_min, self.vehicle.v_max),
            ));
        }
        if self.platoon_sizes.is_empty() || self.platoon_sizes.iter().any(|c| c.size == 0 || c.probability < 0.0) {
            return Err(invalid("platoon_sizes", "need at least one size >= 1 with non-negative probability".into()));
        }
        let total: f64 = self.platoon_sizes.iter().map(|c| c.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("platoon_sizes", format!("probabilities sum to {total}, expected 1")));
        }
        if let Some(arrivals) = &self.arrivals {
            for a in arrivals {
                if a.size == 0 {
                    return Err(invalid("arrivals", "platoon size must be >= 1".into()));
                }
                if !(a.entry_speed >= self.vehicle.v_min && a.entry_speed <= self.vehicle.v_max) {
                    return Err(invalid("arrivals", format!("entry speed {} outside speed bounds", a.entry_speed)));
                }
                if !(a.entry_time >= 0.0) {
                    return Err(invalid("arrivals", format!("entry time {} is negative", a.entry_time)));
                }
            }
        }
        Ok(())
    }

    pub fn volume(&self, road: Road) -> f64 {
        match road {
            Road::Main => self.main_volume,
            Road::Ramp => self.ramp_volume,
        }
    }

    pub fn mean_platoon_size(&self) -> f64 {
        self.platoon_sizes.iter().map(|c| c.size as f64 * c.probability).sum()
    }

    pub fn max_platoon_size(&self) -> u32 {
        self.platoon_sizes.iter().filter(|c| c.probability > 0.0).map(|c| c.size).max().unwrap_or(1)
    }

    /// Center-to-center spacing of consecutive platoon members.
    pub fn member_spacing(&self) -> f64 {
        self.delta + self.vehicle.l_c
    }

    /// Smallest entry-time difference between consecutive platoons on one
    /// road: at least `tau_max`, and large enough that the entering leader
    /// keeps the rear-end gap to the largest possible predecessor through
    /// its cruise phase even if that predecessor only ever moves at `v_min`.
    pub fn spacing_floor(&self) -> f64 {
        let p = &self.vehicle;
        let tail = (self.max_platoon_size() as f64 - 1.0) * self.member_spacing();
        let gap = p.safe_distance(p.v_max) + (p.v_max - p.v_min) * self.tau_max + tail;
        (gap / p.v_min).max(self.tau_max)
    }

    /// Uniform inter-arrival bounds `[lo, hi]` that realize the road's
    /// volume with mean `3600·E[M] / volume`, or `None` for zero volume.
    pub fn inter_arrival_bounds(&self, road: Road) -> Result<Option<(f64, f64)>, ScenarioError> {
        let volume = self.volume(road);
        if volume == 0.0 {
            return Ok(None);
        }
        let mean = 3600.0 * self.mean_platoon_size() / volume;
        let floor = self.spacing_floor();
        let hi = 2.0 * mean - floor;
        if hi < floor {
            return Err(ScenarioError::Infeasible {
                road,
                binding: format!(
                    "volume {volume} vph needs mean platoon headway {mean:.3} s, below the spacing floor {floor:.3} s \
                     (delay bound and rear-end entry feasibility at v_min)"
                ),
            });
        }
        Ok(Some((floor, hi)))
    }
}

/// A platoon entering the control zone with its leader at position 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalEvent {
    pub platoon: u32,
    pub road: Road,
    pub entry_time: f64,
    pub entry_speed: f64,
    pub size: u32,
}

/// Sample (or take from the config) the ordered list of platoon arrivals.
///
/// Per road, inter-arrival times are uniform on
/// [`ScenarioConfig::inter_arrival_bounds`]. Arrivals on different roads are
/// additionally kept at least `tau_max` apart by shifting the later one,
/// which keeps every earlier plan visible to every later snapshot.
pub fn generate_arrivals(config: &ScenarioConfig) -> Result<Vec<ArrivalEvent>, ScenarioError> {
    if let Some(explicit) = &config.arrivals {
        let mut specs: Vec<ArrivalSpec> = explicit.iter().copied().filter(|a| a.entry_time < config.horizon).collect();
        specs.sort_by(|a, b| a.entry_time.total_cmp(&b.entry_time).then(a.road.cmp(&b.road)));
        return Ok(specs
            .into_iter()
            .enumerate()
            .map(|(i, a)| ArrivalEvent {
                platoon: i as u32,
                road: a.road,
                entry_time: a.entry_time,
                entry_speed: a.entry_speed,
                size: a.size,
            })
            .collect());
    }

    let sizes = WeightedIndex::new(config.platoon_sizes.iter().map(|c| c.probability))
        .map_err(|e| invalid("platoon_sizes", e.to_string()))?;
    let [speed_lo, speed_hi] = config.entry_speed_range;

    struct Stream {
        rng: ChaCha8Rng,
        bounds: (f64, f64),
        next: f64,
    }
    let mut streams: Vec<Option<Stream>> = Vec::new();
    for road in Road::ALL {
        let stream = match config.inter_arrival_bounds(road)? {
            Some(bounds) => {
                let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
                rng.set_stream(road.index() as u64 + 1);
                let next = sample_gap(&mut rng, bounds);
                Some(Stream { rng, bounds, next })
            }
            None => None,
        };
        streams.push(stream);
    }

    let mut events = Vec::new();
    let mut last_entry: Option<f64> = None;
    loop {
        let pick = Road::ALL
            .into_iter()
            .filter_map(|r| streams[r.index()].as_ref().map(|s| (r, s.next)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let Some((road, next)) = pick else { break };
        let entry_time = match last_entry {
            Some(prev) => next.max(prev + config.tau_max),
            None => next,
        };
        if entry_time >= config.horizon {
            streams[road.index()] = None;
            continue;
        }
        let stream = streams[road.index()].as_mut().expect("picked stream exists");
        let size = config.platoon_sizes[sizes.sample(&mut stream.rng)].size;
        let entry_speed = if speed_hi > speed_lo { stream.rng.gen_range(speed_lo..=speed_hi) } else { speed_lo };
        events.push(ArrivalEvent { platoon: events.len() as u32, road, entry_time, entry_speed, size });
        stream.next = entry_time + sample_gap(&mut stream.rng, stream.bounds);
        last_entry = Some(entry_time);
    }
    Ok(events)
}

fn sample_gap(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

/// Position of some vehicle at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionSample {
    pub t: f64,
    pub p: f64,
}

/// Whether an entering leader starts in a feasible state: its speed lies in
/// `[v_min, v_max]` and, when there is a same-road predecessor, the gap to
/// that predecessor's last follower is at least `γ + φ·v`.
///
/// `predecessor_last_follower` must cover the entry time; the position is
/// linearly interpolated between samples.
pub fn validate_entry_feasibility(
    event: &ArrivalEvent,
    predecessor_last_follower: Option<&[PositionSample]>,
    params: &VehicleParams,
) -> bool {
    if !(event.entry_speed >= params.v_min && event.entry_speed <= params.v_max) {
        return false;
    }
    let Some(trace) = predecessor_last_follower else { return true };
    let Some(p_pred) = interpolate(trace, event.entry_time) else { return false };
    // The entering leader sits at position 0.
    p_pred >= params.safe_distance(event.entry_speed)
}

fn interpolate(trace: &[PositionSample], t: f64) -> Option<f64> {
    let idx = trace.partition_point(|s| s.t < t);
    if idx < trace.len() && trace[idx].t == t {
        return Some(trace[idx].p);
    }
    if idx == 0 || idx == trace.len() {
        return None;
    }
    let (a, b) = (trace[idx - 1], trace[idx]);
    Some(a.p + (b.p - a.p) * (t - a.t) / (b.t - a.t))
}

fn positive(field: &'static str, value: f64) -> Result<(), ScenarioError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {value}")))
    }
}

fn invalid(field: &'static str, reason: String) -> ScenarioError {
    ScenarioError::Invalid { field, reason }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn zero_horizon_gives_no_arrivals() {
        let cfg = ScenarioConfig { horizon: 0.0, ..ScenarioConfig::default() };
        assert!(generate_arrivals(&cfg).unwrap().is_empty());
    }

    #[test]
    fn same_seed_same_arrivals() {
        let cfg = ScenarioConfig { rng_seed: 42, ..ScenarioConfig::default() };
        assert_eq!(generate_arrivals(&cfg).unwrap(), generate_arrivals(&cfg).unwrap());
        let other = ScenarioConfig { rng_seed: 43, ..cfg.clone() };
        assert_ne!(generate_arrivals(&cfg).unwrap(), generate_arrivals(&other).unwrap());
    }

    #[test]
    fn main_volume_matches_within_ten_percent() {
        let cfg = ScenarioConfig::default();
        let events = generate_arrivals(&cfg).unwrap();
        for road in Road::ALL {
            let vehicles: u32 = events.iter().filter(|e| e.road == road).map(|e| e.size).sum();
            let rate = vehicles as f64 * 3600.0 / cfg.horizon;
            let target = cfg.volume(road);
            assert!((rate - target).abs() / target < 0.10, "{road}: {rate} vs {target}");
        }
        let main_events = events.iter().filter(|e| e.road == Road::Main).count() as f64;
        let expected = 700.0 / cfg.mean_platoon_size();
        assert!((main_events - expected).abs() / expected < 0.10);
    }

    #[test]
    fn unachievable_volume_is_reported() {
        let cfg = ScenarioConfig { main_volume: 5000.0, ..ScenarioConfig::default() };
        match generate_arrivals(&cfg) {
            Err(ScenarioError::Infeasible { road: Road::Main, binding }) => assert!(binding.contains("spacing floor")),
            other => panic!("expected infeasible main road, got {other:?}"),
        }
    }

    #[test]
    fn bad_probabilities_rejected() {
        let mut cfg = ScenarioConfig::default();
        cfg.platoon_sizes[0].probability = 0.5;
        assert!(matches!(cfg.validate(), Err(ScenarioError::Invalid { field: "platoon_sizes", .. })));
    }

    #[test]
    fn entry_feasibility_boundary() {
        let params = VehicleParams::default();
        let ev = ArrivalEvent { platoon: 1, road: Road::Main, entry_time: 10.0, entry_speed: 15.0, size: 3 };
        let bound = params.safe_distance(15.0);
        let at = |p: f64| vec![PositionSample { t: 9.0, p }, PositionSample { t: 11.0, p }];
        assert!(validate_entry_feasibility(&ev, Some(&at(600.0)), &params));
        assert!(validate_entry_feasibility(&ev, Some(&at(bound)), &params));
        assert!(!validate_entry_feasibility(&ev, Some(&at(bound - 0.01)), &params));
        assert!(validate_entry_feasibility(&ev, None, &params));
        let late = [PositionSample { t: 12.0, p: 600.0 }];
        assert!(!validate_entry_feasibility(&ev, Some(&late), &params));
    }

    #[test]
    fn toml_round_trip_and_parse_errors() {
        let cfg = ScenarioConfig::default();
        let text = cfg.to_toml_string();
        assert_eq!(ScenarioConfig::from_toml_str(&text, "inline").unwrap(), cfg);
        let err = ScenarioConfig::from_toml_str("horizon = \"long\"\n", "bad.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.toml") && msg.contains("horizon"), "{msg}");
    }
}
