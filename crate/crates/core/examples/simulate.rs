//! Baseline run: sample the trajectory and print the response metrics.
//!
//! cargo run --release --example simulate

use icbsim::metrics::RunSettings;
use icbsim::baseline_params;

fn main() -> icbsim::Result<()> {
    let params = baseline_params();
    let (traj, report) = RunSettings::default().simulate(&params)?;

    println!("{:>8} {:>12} {:>12} {:>12} {:>10} {:>10}", "t", "C", "A", "I", "E", "S");
    for (t, s) in traj.times.iter().zip(&traj.states).step_by(600).take(15) {
        println!("{t:>8.1} {:>12.4} {:>12.4} {:>12.4e} {:>10.4} {:>10.4}", s.c, s.a, s.i, s.e, s.s);
    }
    println!();
    println!("class            {:?}", report.class);
    println!("delay            {:.2?} days", report.delay_length);
    println!("dormancy         {:.2?} days", report.dormancy_length);
    println!("cycle period     {:.2?} days", report.cycle_period);
    println!("effector window  {:.3?} days", report.effector_window);
    println!("steps            {} accepted, {} rejected", traj.step_stats.accepted, traj.step_stats.rejected);
    Ok(())
}
