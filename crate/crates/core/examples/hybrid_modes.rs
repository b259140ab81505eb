//! Follows a hybrid oscillator through its mode switches.

use neurosens::{builtin_system, simulate};

fn main() -> neurosens::Result<()> {
    let sys = builtin_system("HybridOscillator")?;
    let traj = simulate(&sys, &[1.0, 0.0], 600, 0.01)?;
    let mut last = None;
    for (i, x) in traj.states().iter().enumerate() {
        let mode = sys.select_mode(x)?;
        if last != Some(mode) {
            println!("t = {:5.2}  mode {:<12} x = [{:+.4}, {:+.4}]", traj.time(i), sys.modes()[mode].name, x[0], x[1]);
            last = Some(mode);
        }
    }
    Ok(())
}
