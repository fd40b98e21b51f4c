//! Two platoons, one per road, planned through the coordinator in arrival
//! order. The second leader has to keep the lateral headway to the first.

use platoon_merge::coordinator::{Coordinator, DelayModel};
use platoon_merge::planner::{plan_leader, PlanRequest};
use platoon_merge::{Road, ScenarioConfig};

fn main() {
    let config = ScenarioConfig::default();
    let mut coordinator = Coordinator::new(DelayModel::new(config.tau_min, config.tau_max));
    let arrivals = [(0, Road::Main, 0.0, 15.0, 3), (1, Road::Ramp, 1.0, 16.0, 2)];
    for (id, road, t0, v0, size) in arrivals {
        coordinator.register_entry(id, road, t0, size, v0).unwrap();
        let (t_plan, info) = coordinator.info_set_available_at(id).unwrap();
        let pf = config.geometry.zone_length(road);
        let req = PlanRequest::after_cruise(info, t0, v0, t_plan, pf, config.vehicle, config.delta, config.dt_search);
        let plan = plan_leader(&req).unwrap();
        let published = coordinator.publish_plan(id, plan.phi, plan.tf, plan.tf_last, t_plan).unwrap();
        println!(
            "platoon {id} ({road}): window [{:.2}, {:.2}], tf {:.2}, last follower {:.2}, binding {}, published at {published}",
            req.window.t_lower, req.window.t_upper, plan.tf, plan.tf_last, plan.binding
        );
    }
}
