//! Force two plans that ignore each other and watch the monitors fire.

use platoon_merge::{run, EngineOptions, RunMode, ScenarioConfig};

fn main() -> anyhow::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/bad_plan.toml");
    let config = ScenarioConfig::load(path)?;
    let run = run(&config, RunMode::Optimal, &EngineOptions { audit_only: true, ..Default::default() })?;
    for p in &run.plans {
        println!(
            "platoon {}: window [{:.2}, {:.2}], forced tf {:.2}",
            p.platoon, p.window.t_lower, p.window.t_upper, p.tf
        );
    }
    for v in &run.violations {
        println!("t={:>6.2} {:?} {:?} x{}: {}", v.t, v.kind, v.vehicles, v.occurrences, v.detail);
    }

    // Without audit mode the first breach ends the run.
    let err = platoon_merge::run(&config, RunMode::Optimal, &EngineOptions::default()).unwrap_err();
    println!("strict run: {err}");
    Ok(())
}
