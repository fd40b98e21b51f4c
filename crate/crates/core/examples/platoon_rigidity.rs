//! Followers copy their leader's control, so gaps never move. A follower
//! fault shows what the checks report when that breaks.

use platoon_merge::engine::{FaultPlan, FollowerFault};
use platoon_merge::metrics::summarize;
use platoon_merge::{run, EngineOptions, RunMode, ScenarioConfig};

fn main() {
    let config = ScenarioConfig { horizon: 600.0, ..Default::default() };
    let options = EngineOptions { audit_only: true, ..Default::default() };
    let report = |config: &ScenarioConfig| {
        let s = summarize(&run(config, RunMode::Optimal, &options).unwrap());
        let gap = s.gap_report.unwrap();
        let stab = s.string_stability.unwrap();
        println!(
            "  gap error {:.2e} m over {} samples, stable {}, sup deviation {}",
            gap.max_error, gap.samples, stab.stable, stab.sup_deviation
        );
    };
    println!("nominal:");
    report(&config);

    let fault = FollowerFault { platoon: 2, member: 1, accel_offset: -0.5, start: 20.0, duration: 1.0 };
    let faulty = ScenarioConfig { faults: FaultPlan { follower_faults: vec![fault], ..Default::default() }, ..config };
    println!("follower 1 of platoon 2 brakes an extra 0.5 m/s² for 1 s:");
    report(&faulty);
}
