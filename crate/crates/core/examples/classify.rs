//! The four response types, each produced by nudging a few parameters.
//!
//! cargo run --release --example classify

use icbsim::metrics::RunSettings;
use icbsim::{baseline_params, ParamId};

fn main() -> icbsim::Result<()> {
    let base = baseline_params();
    let cases = [
        ("no response", base.with(ParamId::Beta, 0.0089988).with(ParamId::Gamma, 37.4168)),
        ("quick full", base.with(ParamId::Gamma, 37.4168).with(ParamId::EStar, 5.5)),
        ("quick partial?", base.with(ParamId::Beta, 0.0089988).with(ParamId::RMax, 1.0)),
        ("delayed", base),
    ];
    let settings = RunSettings::default();
    println!("{:<16} {:<13} {:>10} {:>10} {:>10}", "set", "class", "delay", "dormancy", "size");
    for (name, p) in cases {
        let r = settings.evaluate(&p)?;
        let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.1}"));
        println!(
            "{name:<16} {:<13} {:>10} {:>10} {:>10}",
            r.class.name(),
            f(r.delay_length),
            f(r.dormancy_length),
            f(r.post_treatment_size)
        );
    }
    Ok(())
}
