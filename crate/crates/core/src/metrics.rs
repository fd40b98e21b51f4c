//! Fuel, travel time and throughput of a run, and the side-by-side
//! comparison of modes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{PlanRecord, RunMode, SimRun, TraceRecord};
use crate::follower::{check_intra_platoon_gaps, check_trace_string_stability, GapReport, StabilityReport};
use crate::scenario::{Road, ScenarioError, VehicleParams};
use crate::trajectory::Cubic;

pub const ML_PER_GALLON: f64 = 3785.411784;

/// Polynomial fuel-rate metamodel in mL/s. The defaults are the published
/// fit of Kamal et al. (2013) for a mid-size passenger car.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuelModelCoefficients {
    /// `[b0, b1, b2, b3]`: rate at constant speed, cubic in `v`.
    pub cruise_poly: [f64; 4],
    /// `[c0, c1, c2]`: multiplies positive acceleration, quadratic in `v`.
    pub accel_poly: [f64; 3],
}

impl Default for FuelModelCoefficients {
    fn default() -> Self {
        FuelModelCoefficients {
            cruise_poly: [0.1569, 2.450e-2, -7.415e-4, 5.975e-5],
            accel_poly: [0.07224, 9.681e-2, 1.075e-3],
        }
    }
}

impl FuelModelCoefficients {
    pub fn cruise_rate(&self, v: f64) -> f64 {
        let [b0, b1, b2, b3] = self.cruise_poly;
        b0 + v * (b1 + v * (b2 + v * b3))
    }

    pub fn accel_factor(&self, v: f64) -> f64 {
        let [c0, c1, c2] = self.accel_poly;
        c0 + v * (c1 + v * c2)
    }

    /// The cruise rate must stay positive over the admissible speeds.
    pub fn validate(&self, limits: &VehicleParams) -> Result<(), ScenarioError> {
        let cruise = Cubic { origin: 0.0, coeffs: self.cruise_poly }.rebased(limits.v_min);
        let (v, min) = Cubic::min_on_interval(cruise.coeffs, limits.v_max - limits.v_min);
        if !(min > 0.0) {
            return Err(ScenarioError::Invalid {
                field: "fuel.cruise_poly",
                reason: format!("cruise rate {min} is not positive at v = {}", limits.v_min + v),
            });
        }
        Ok(())
    }
}

/// Instantaneous fuel rate; braking costs only the cruise term.
pub fn fuel_rate(v: f64, u: f64, coeffs: &FuelModelCoefficients) -> f64 {
    (coeffs.cruise_rate(v) + u.max(0.0) * coeffs.accel_factor(v)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleMetrics {
    pub vehicle: u32,
    pub platoon: u32,
    pub member: u32,
    pub road: Road,
    pub entry_time: f64,
    pub exit_time: f64,
    pub travel_time: f64,
    pub fuel_ml: f64,
    pub min_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: RunMode,
    pub scenario: String,
    pub seed: u64,
    /// SHA-256 of the serialized scenario; equal digests mean matched runs.
    pub config_digest: String,
    pub dt_sim: f64,
    pub horizon: f64,
    pub platoons: usize,
    pub vehicles: usize,
    pub vehicles_completed: usize,
    pub unfinished: usize,
    pub deferred_entries: u32,
    pub avg_travel_time: f64,
    pub avg_fuel_ml: f64,
    pub avg_fuel_gallons: f64,
    pub throughput_vph: f64,
    /// Lowest speed any completed vehicle had inside the control zone.
    pub min_zone_speed: f64,
    pub violation_count: usize,
    pub gap_report: Option<GapReport>,
    pub string_stability: Option<StabilityReport>,
    pub plans: Vec<PlanRecord>,
    pub per_vehicle: Vec<VehicleMetrics>,
}

pub fn config_digest(run: &SimRun) -> String {
    let digest = Sha256::digest(run.config.to_toml_string().as_bytes());
    hex::encode(digest)
}

/// Travel time and in-zone fuel of every vehicle that crossed the whole
/// control zone, plus run-level aggregates.
pub fn summarize(run: &SimRun) -> RunSummary {
    let trace = &run.trace;
    let mut entry = vec![None; trace.vehicles.len()];
    let mut exit = vec![None; trace.vehicles.len()];
    for e in &trace.events {
        match e {
            crate::engine::Event::VehicleEnteredZone { t, vehicle } => entry[*vehicle as usize] = Some(*t),
            crate::engine::Event::VehicleExitedZone { t, vehicle } => exit[*vehicle as usize] = Some(*t),
            _ => {}
        }
    }
    let geometry = run.config.geometry;
    let mut per_vehicle = Vec::new();
    for (records, info) in trace.by_vehicle().iter().zip(&trace.vehicles) {
        let (Some(t_in), Some(t_out)) = (entry[info.id as usize], exit[info.id as usize]) else { continue };
        let zone = geometry.zone_length(info.road);
        let min_speed = records.iter().filter(|r| r.p >= 0.0 && r.p <= zone).map(|r| r.v).fold(f64::INFINITY, f64::min);
        per_vehicle.push(VehicleMetrics {
            vehicle: info.id,
            platoon: info.platoon,
            member: info.member,
            road: info.road,
            entry_time: t_in,
            exit_time: t_out,
            travel_time: t_out - t_in,
            fuel_ml: integrate_fuel(records, trace.dt, t_in, t_out),
            min_speed,
        });
    }
    let n = per_vehicle.len();
    let mean = |f: fn(&VehicleMetrics) -> f64| {
        if n == 0 {
            f64::NAN
        } else {
            per_vehicle.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let avg_travel_time = mean(|m| m.travel_time);
    let avg_fuel_ml = mean(|m| m.fuel_ml);
    let completed_in_horizon = per_vehicle.iter().filter(|m| m.exit_time <= run.config.horizon).count();
    let throughput_vph =
        if run.config.horizon > 0.0 { completed_in_horizon as f64 * 3600.0 / run.config.horizon } else { 0.0 };
    let (gap_report, string_stability) = if run.mode == RunMode::Optimal {
        (
            Some(check_intra_platoon_gaps(trace, run.config.delta, run.config.vehicle.l_c, 1e-6)),
            Some(check_trace_string_stability(trace)),
        )
    } else {
        (None, None)
    };
    RunSummary {
        mode: run.mode,
        scenario: run.config.name.clone(),
        seed: run.config.rng_seed,
        config_digest: config_digest(run),
        dt_sim: run.config.dt_sim,
        horizon: run.config.horizon,
        platoons: run.arrivals.len(),
        vehicles: trace.vehicles.len(),
        vehicles_completed: n,
        unfinished: run.unfinished.len(),
        deferred_entries: run.deferred_entries,
        avg_travel_time,
        avg_fuel_ml,
        avg_fuel_gallons: avg_fuel_ml / ML_PER_GALLON,
        throughput_vph,
        min_zone_speed: per_vehicle.iter().map(|m| m.min_speed).fold(f64::INFINITY, f64::min),
        violation_count: run.violations.len(),
        gap_report,
        string_stability,
        plans: run.plans.clone(),
        per_vehicle,
    }
}

/// Trapezoid rule over one vehicle's samples, clipped to `[t_in, t_out]`.
fn integrate_fuel(records: &[TraceRecord], dt: f64, t_in: f64, t_out: f64) -> f64 {
    let mut total = 0.0;
    for w in records.windows(2) {
        let (ta, tb) = (w[0].step as f64 * dt, w[1].step as f64 * dt);
        let (lo, hi) = (ta.max(t_in), tb.min(t_out));
        if hi <= lo {
            continue;
        }
        let rate = |t: f64| w[0].fuel_rate + (w[1].fuel_rate - w[0].fuel_rate) * (t - ta) / (tb - ta);
        total += 0.5 * (rate(lo) + rate(hi)) * (hi - lo);
    }
    total
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("summaries come from different configurations ({0} vs {1})")]
    MismatchedConfig(String, String),
    #[error("comparison needs an optimal-mode summary")]
    MissingOptimal,
}

/// `(baseline - optimal) / baseline · 100`.
pub fn improvement(baseline: f64, optimal: f64) -> f64 {
    (baseline - optimal) / baseline * 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub baseline: RunMode,
    pub travel_time_pct: f64,
    pub fuel_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<(RunMode, f64, f64)>,
    pub improvements: Vec<Improvement>,
}

impl Comparison {
    /// Plain-text table: one column per mode, then improvement rows.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<32}", "Metric");
        for (mode, _, _) in &self.rows {
            let _ = write!(out, "{:>12}", mode.as_str());
        }
        out.push('\n');
        let _ = write!(out, "{:<32}", "Avg. travel time [s]");
        for (_, tt, _) in &self.rows {
            let _ = write!(out, "{tt:>12.2}");
        }
        out.push('\n');
        let _ = write!(out, "{:<32}", "Avg. fuel consumption [gallon]");
        for (_, _, fuel) in &self.rows {
            let _ = write!(out, "{:>12.4}", fuel / ML_PER_GALLON);
        }
        out.push('\n');
        for imp in &self.improvements {
            let label = format!("Improvement ({}) [%]", imp.baseline);
            let _ = writeln!(out, "{label:<32}travel time {:>6.1}   fuel {:>6.1}", imp.travel_time_pct, imp.fuel_pct);
        }
        out
    }
}

/// Compare every baseline summary against the optimal one.
pub fn compare(summaries: &BTreeMap<RunMode, RunSummary>) -> Result<Comparison, MetricsError> {
    let optimal = summaries.get(&RunMode::Optimal).ok_or(MetricsError::MissingOptimal)?;
    for s in summaries.values() {
        if s.config_digest != optimal.config_digest {
            return Err(MetricsError::MismatchedConfig(s.config_digest.clone(), optimal.config_digest.clone()));
        }
    }
    let rows = summaries.values().map(|s| (s.mode, s.avg_travel_time, s.avg_fuel_ml)).collect();
    let improvements = summaries
        .values()
        .filter(|s| s.mode != RunMode::Optimal)
        .map(|s| Improvement {
            baseline: s.mode,
            travel_time_pct: improvement(s.avg_travel_time, optimal.avg_travel_time),
            fuel_pct: improvement(s.avg_fuel_ml, optimal.avg_fuel_ml),
        })
        .collect();
    Ok(Comparison { rows, improvements })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fuel_rate_examples() {
        let c = FuelModelCoefficients::default();
        assert_eq!(fuel_rate(0.0, 0.0, &c), c.cruise_poly[0]);
        assert_eq!(fuel_rate(12.0, -2.0, &c), fuel_rate(12.0, 0.0, &c));
        let diff = fuel_rate(15.0, 1.0, &c) - fuel_rate(15.0, 0.0, &c);
        let [c0, c1, c2] = c.accel_poly;
        assert!((diff - (c0 + c1 * 15.0 + c2 * 225.0)).abs() < 1e-12);
    }

    #[test]
    fn default_coefficients_valid() {
        assert!(FuelModelCoefficients::default().validate(&VehicleParams::default()).is_ok());
        let bad = FuelModelCoefficients { cruise_poly: [-1.0, 0.0, 0.0, 0.0], ..Default::default() };
        assert!(bad.validate(&VehicleParams::default()).is_err());
    }

    #[test]
    fn improvement_formula() {
        assert!((improvement(57.33, 46.1) - 19.6).abs() < 0.05);
        assert_eq!(improvement(40.0, 40.0), 0.0);
        assert!((improvement(0.05, 0.022) - 56.0).abs() < 1e-9);
    }

    #[test]
    fn fuel_integral_clips_to_zone() {
        let rec = |step, rate| TraceRecord {
            step,
            vehicle: 0,
            mode: crate::engine::Mode::CarFollowing,
            p: 0.0,
            v: 10.0,
            u: 0.0,
            fuel_rate: rate,
        };
        let records: Vec<_> = (0..=10).map(|k| rec(k, 2.0)).collect();
        let total = integrate_fuel(&records, 0.1, 0.25, 0.75);
        assert!((total - 1.0).abs() < 1e-12);
    }
}
