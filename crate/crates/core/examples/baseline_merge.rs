//! Human-driven merge: car following, the ramp's yield rule, and a short
//! baseline run.

use platoon_merge::baseline::{car_following_accel, yield_decision, Approach, CarFollowingParams, Lead};
use platoon_merge::metrics::summarize;
use platoon_merge::{run, EngineOptions, RunMode, ScenarioConfig, VehicleParams};

fn main() {
    let cf = CarFollowingParams::default();
    let limits = VehicleParams::default();
    for gap in [60.0, 30.0, 10.0, 3.0] {
        let u = car_following_accel(15.0, Some(Lead { gap, speed: 10.0 }), &cf, &limits);
        println!("15 m/s behind a 10 m/s vehicle {gap:>4} m ahead: u = {u:.3}");
    }
    let main_road = [Approach { distance: 40.0, speed: 15.0 }];
    for d in [30.0, 120.0] {
        let ramp = Approach { distance: d, speed: 12.0 };
        println!("ramp vehicle {d} m out: {:?}", yield_decision(ramp, &main_road, &cf, &limits));
    }

    let config = ScenarioConfig { horizon: 900.0, ..Default::default() };
    for mode in [RunMode::Baseline1, RunMode::Baseline2] {
        let s = summarize(&run(&config, mode, &EngineOptions::default()).unwrap());
        println!(
            "{mode}: {} vehicles, travel {:.2} s, fuel {:.2} mL, slowest in zone {:.2} m/s",
            s.vehicles_completed, s.avg_travel_time, s.avg_fuel_ml, s.min_zone_speed
        );
    }
}
