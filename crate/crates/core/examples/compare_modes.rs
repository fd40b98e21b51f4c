//! Run the three cases on the same arrivals and print the comparison table.
//! Pass a scenario path to use something other than the defaults.

use std::collections::BTreeMap;

use platoon_merge::engine::run_with_arrivals;
use platoon_merge::metrics::{compare, summarize};
use platoon_merge::scenario::generate_arrivals;
use platoon_merge::{EngineOptions, RunMode, ScenarioConfig};

fn main() -> anyhow::Result<()> {
    let config = match std::env::args().nth(1) {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    let arrivals = generate_arrivals(&config)?;
    let mut summaries = BTreeMap::new();
    for mode in RunMode::ALL {
        let run = run_with_arrivals(&config, mode, &EngineOptions::default(), arrivals.clone())?;
        summaries.insert(mode, summarize(&run));
    }
    print!("{}", compare(&summaries)?.render());
    Ok(())
}
