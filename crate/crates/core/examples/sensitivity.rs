//! One-at-a-time +1% sensitivity of delay and dormancy around the baseline.
//!
//! cargo run --release --example sensitivity

use icbsim::experiments::{oat_sensitivity, RelChange};
use icbsim::metrics::RunSettings;
use icbsim::baseline_params;

fn pct(r: RelChange) -> String {
    match r {
        RelChange::Finite(v) => format!("{:+.1}%", v * 100.0),
        RelChange::Infinite => "never".into(),
        RelChange::Undefined => "-".into(),
    }
}

fn main() -> icbsim::Result<()> {
    let rows = oat_sensitivity(&baseline_params(), 0.01, &RunSettings::default())?;
    println!("{:<8} {:>10} {:>10}  class", "param", "delay", "dormancy");
    for r in rows {
        let class = r.class.map_or("error", |c| c.name());
        println!("{:<8} {:>10} {:>10}  {class}", r.param.name(), pct(r.delta_delay), pct(r.delta_dormancy));
    }
    Ok(())
}
