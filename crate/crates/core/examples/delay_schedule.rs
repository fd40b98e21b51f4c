//! How the communication delay bound shifts planning and publication.

use platoon_merge::{run, EngineOptions, RunMode, ScenarioConfig};

fn main() {
    for tau in [0.0, 0.2, 0.5, 1.0] {
        let config = ScenarioConfig { horizon: 60.0, tau_min: 0.0, tau_max: tau, ..Default::default() };
        let run = run(&config, RunMode::Optimal, &EngineOptions::default()).expect("clean run");
        println!("tau_max = {tau}");
        for p in run.plans.iter().take(3) {
            println!(
                "  platoon {} entered {:.3}, request {:.3}, planned {:.3}, published {:.3}, missing {:?}",
                p.platoon, p.entry_time, p.snapshot_as_of, p.t_plan, p.published_at, p.missing_predecessors
            );
        }
    }
}
