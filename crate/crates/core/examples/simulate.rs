//! Simulates a benchmark forward and backward and prints the trajectory as CSV.
//!
//! cargo run --example simulate -- Brusselator 0.8 1.5

use neurosens::{builtin_system, simulate, simulate_backward};

fn main() -> neurosens::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map_or("Vanderpol", String::as_str);
    let sys = builtin_system(name)?;
    let x0: Vec<f64> = if args.len() > 1 {
        args[1..].iter().map(|a| a.parse().expect("numeric state")).collect()
    } else {
        let theta = &sys.meta().init_set;
        theta.lower().iter().zip(theta.upper()).map(|(l, u)| l + 0.75 * (u - l)).collect()
    };
    let h = sys.default_step();
    let fwd = simulate(&sys, &x0, 200, h)?;
    print!("{}", fwd.to_csv());

    let back = simulate_backward(&sys, fwd.last(), 200, h)?;
    let err: f64 = back.last().iter().zip(&x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    eprintln!("{}: {} steps of {h}, backward round trip error {err:.2e}", sys.name(), fwd.steps());
    Ok(())
}
