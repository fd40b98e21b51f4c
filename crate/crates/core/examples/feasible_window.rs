//! Exit-time windows for a few entry states, including one close enough to
//! the merge that braking hard enough is possible.

use platoon_merge::trajectory::feasible_window;
use platoon_merge::VehicleParams;

fn main() {
    let limits = VehicleParams::default();
    for (p0, v0) in [(0.0, 13.89), (0.0, 16.67), (7.5, 15.0), (520.0, 16.0)] {
        let w = feasible_window(0.0, p0, v0, 560.0, &limits);
        println!(
            "p0={p0:>5} v0={v0:>5}: [{:.3}, {:.3}] s, upper from {:?}, candidates {:?}",
            w.t_lower, w.t_upper, w.upper_case, w.candidates
        );
    }
}
