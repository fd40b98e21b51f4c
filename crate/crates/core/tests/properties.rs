use platoon_merge::scenario::{generate_arrivals, Road, ScenarioConfig, VehicleParams};
use platoon_merge::trajectory::{feasible_window, solve_boundary, BoundaryConditions};
use proptest::prelude::*;

fn boundary() -> impl Strategy<Value = BoundaryConditions> {
    (0.0..3600.0, 0.0..100.0, 5.0..16.67, 20.0..600.0, 1.0..120.0).prop_map(|(t0, p0, v0, d, h)| BoundaryConditions {
        t0,
        p0,
        v0,
        tf: t0 + h,
        pf: p0 + d,
    })
}

proptest! {
    #[test]
    fn boundary_conditions_hold(bc in boundary()) {
        let poly = solve_boundary(&bc).unwrap();
        let (s0, sf) = (poly.eval(bc.t0).unwrap(), poly.eval(bc.tf).unwrap());
        prop_assert!((s0.p - bc.p0).abs() < 1e-9);
        prop_assert!((s0.v - bc.v0).abs() < 1e-9);
        prop_assert!((sf.p - bc.pf).abs() < 1e-9);
        prop_assert!(sf.u.abs() < 1e-9);
    }

    #[test]
    fn speed_and_control_are_derivatives(bc in boundary(), frac in 0.01..0.99f64) {
        let poly = solve_boundary(&bc).unwrap();
        let t = bc.t0 + frac * (bc.tf - bc.t0);
        let h = 1e-4;
        let (a, b, c) = (poly.eval_unchecked(t - h), poly.eval_unchecked(t), poly.eval_unchecked(t + h));
        prop_assert!(((c.p - a.p) / (2.0 * h) - b.v).abs() < 1e-5);
        prop_assert!(((c.v - a.v) / (2.0 * h) - b.u).abs() < 1e-5);
    }

    #[test]
    fn shifting_time_shifts_the_solution(bc in boundary(), shift in -1000.0..1000.0f64, frac in 0.0..1.0f64) {
        let moved = BoundaryConditions { t0: bc.t0 + shift, tf: bc.tf + shift, ..bc };
        let (p, q) = (solve_boundary(&bc).unwrap(), solve_boundary(&moved).unwrap());
        let t = bc.t0 + frac * (bc.tf - bc.t0);
        let (s, r) = (p.eval_unchecked(t), q.eval_unchecked(t + shift));
        prop_assert!((s.p - r.p).abs() < 1e-9 && (s.v - r.v).abs() < 1e-9 && (s.u - r.u).abs() < 1e-9);

        let lim = VehicleParams::default();
        let w = feasible_window(bc.t0, bc.p0, bc.v0, bc.pf, &lim);
        let wm = feasible_window(moved.t0, moved.p0, moved.v0, moved.pf, &lim);
        prop_assert!((wm.t_lower - w.t_lower - shift).abs() < 1e-9);
        prop_assert!((wm.t_upper - w.t_upper - shift).abs() < 1e-9);
    }

    #[test]
    fn exit_times_inside_the_window_respect_bounds(bc in boundary(), frac in 0.0..=1.0f64) {
        let lim = VehicleParams::default();
        let w = feasible_window(bc.t0, bc.p0, bc.v0, bc.pf, &lim);
        prop_assume!(!w.is_empty());
        let tf = w.t_lower + frac * w.width();
        let poly = solve_boundary(&BoundaryConditions { tf, ..bc }).unwrap();
        for k in 0..=200 {
            let s = poly.eval(bc.t0 + (tf - bc.t0) * k as f64 / 200.0).unwrap();
            prop_assert!(s.u >= lim.u_min - 1e-9 && s.u <= lim.u_max + 1e-9);
            prop_assert!(s.v >= lim.v_min - 1e-9 && s.v <= lim.v_max + 1e-9);
        }
    }

    #[test]
    fn arrivals_respect_spacing(seed in any::<u64>(), tau in 0.0..1.0f64) {
        let config = ScenarioConfig {
            rng_seed: seed,
            horizon: 600.0,
            tau_min: 0.0,
            tau_max: tau,
            ..Default::default()
        };
        let arrivals = generate_arrivals(&config).unwrap();
        let floor = config.spacing_floor();
        for w in arrivals.windows(2) {
            prop_assert!(w[1].entry_time >= w[0].entry_time);
            if w[0].road != w[1].road {
                prop_assert!(w[1].entry_time - w[0].entry_time >= tau - 1e-9);
            }
        }
        for road in Road::ALL {
            let times: Vec<f64> = arrivals.iter().filter(|a| a.road == road).map(|a| a.entry_time).collect();
            for w in times.windows(2) {
                prop_assert!(w[1] - w[0] >= floor - 1e-9);
            }
        }
        prop_assert!(arrivals.iter().all(|a| a.entry_time < config.horizon));
    }
}
