//! Locate the critical gamma and the width of the delayed band around it.
//!
//! cargo run --release --example threshold

use icbsim::experiments::{delayed_band, find_threshold};
use icbsim::metrics::RunSettings;
use icbsim::{baseline_params, ParamId};

fn main() -> icbsim::Result<()> {
    let base = baseline_params();
    let settings = RunSettings::default();

    let th = find_threshold(&base, ParamId::Gamma, 37.40, 37.45, 1e-4, &settings)?;
    println!(
        "critical gamma = {:.5} (+/- {:.1e}), {:?} below / {:?} above, {} runs",
        th.critical_value, th.bracket_width, th.side_classes.0, th.side_classes.1, th.evaluations
    );

    let band = delayed_band(&base, ParamId::Gamma, 37.40, 37.45, 1e-5, &settings)?;
    println!(
        "delayed band in gamma: [{:.5}, {:.5}], width {:.5} ({:.3}% of the edge)",
        band.quick_edge,
        band.no_response_edge,
        band.width,
        100.0 * band.width / band.no_response_edge
    );

    for gamma in [37.400, 37.405, 37.410, 37.412, 37.414, 37.415, 37.416, 37.417] {
        let r = settings.evaluate(&base.with(ParamId::Gamma, gamma))?;
        println!("  gamma {gamma:.3}: {:<11} delay {:.1?}", r.class.name(), r.delay_length);
    }
    Ok(())
}
