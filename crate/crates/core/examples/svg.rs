//! Render the first 400 days of the baseline run as an SVG line chart.
//!
//! cargo run --release --example svg [out.svg]

use icbsim::io::{emit_svg_trajectory, PlotSpec};
use icbsim::metrics::RunSettings;
use icbsim::{baseline_params, Component};

fn main() -> icbsim::Result<()> {
    let (traj, _) = RunSettings::default().simulate(&baseline_params())?;
    let spec = PlotSpec {
        variables: vec![Component::C, Component::E, Component::S],
        t_max: Some(400.0),
        title: Some("Baseline: tumour and T cells".into()),
        ..PlotSpec::default()
    };
    let path = std::env::args().nth(1).unwrap_or_else(|| "baseline.svg".into());
    std::fs::write(&path, emit_svg_trajectory(&traj, &spec)?)?;
    println!("wrote {path}");
    Ok(())
}
