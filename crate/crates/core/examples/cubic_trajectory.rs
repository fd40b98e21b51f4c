//! Solve one leader's boundary problem and print the resulting profile.

use platoon_merge::trajectory::{solve_boundary, BoundaryConditions};

fn main() {
    let bc = BoundaryConditions { t0: 10.0, p0: 7.5, v0: 15.0, tf: 47.0, pf: 560.0 };
    let phi = solve_boundary(&bc).expect("valid boundary");
    println!("a={:.6e} b={:.6e} c={} d={}", phi.a, phi.b, phi.c, phi.d);
    println!("absolute-time coefficients: {:?}", phi.absolute_coefficients());
    println!("{:>6} {:>9} {:>7} {:>8}", "t", "p", "v", "u");
    for k in 0..=8 {
        let t = bc.t0 + (bc.tf - bc.t0) * k as f64 / 8.0;
        let s = phi.eval(t).unwrap();
        println!("{t:>6.2} {:>9.3} {:>7.3} {:>8.4}", s.p, s.v, s.u);
    }
}
