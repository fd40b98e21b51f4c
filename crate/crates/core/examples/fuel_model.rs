//! Fuel rate over speed and acceleration.

use platoon_merge::metrics::{fuel_rate, FuelModelCoefficients, ML_PER_GALLON};

fn main() {
    let coeffs = FuelModelCoefficients::default();
    print!("{:>6}", "v\\u");
    let controls = [-2.0, 0.0, 0.5, 1.0, 2.0];
    for u in controls {
        print!("{u:>8}");
    }
    println!();
    for v in [0.0, 5.0, 10.0, 13.89, 16.67] {
        print!("{v:>6}");
        for u in controls {
            print!("{:>8.4}", fuel_rate(v, u, &coeffs));
        }
        println!();
    }
    let cruise = fuel_rate(15.0, 0.0, &coeffs) * 560.0 / 15.0;
    println!("560 m at 15 m/s: {cruise:.2} mL ({:.5} gal)", cruise / ML_PER_GALLON);
}
