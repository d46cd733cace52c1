//! A course of combination doses for an untreated patient, and the five
//! ways a dose can move a patient through the (beta, gamma) plane.
//!
//! cargo run --release --example dosing

use icbsim::dosing::{journey_case, simulate_with_doses, DoseSchedule, JourneyThresholds};
use icbsim::metrics::RunSettings;
use icbsim::{baseline_params, ParamId};

fn main() -> icbsim::Result<()> {
    let settings = RunSettings::default();
    let patient = baseline_params().with(ParamId::Beta, 0.0089988).with(ParamId::Gamma, 37.4168);

    // four doses three weeks apart, together worth one full combination step
    let schedule = DoseSchedule::repeated(0.0, 21.0, 4, 3e-7, 0.0007)?;
    let s0 = settings.initial_state(&patient);
    let (_, journey) = simulate_with_doses(&patient, s0, &schedule, settings.metrics.horizon, &settings)?;
    println!("{:>6} {:>11} {:>9} {:>9}  outlook", "day", "beta", "gamma", "C");
    for s in &journey.snapshots {
        println!(
            "{:>6.0} {:>11.8} {:>9.4} {:>9.2}  {} (delay {:.1?})",
            s.time,
            s.beta,
            s.gamma,
            s.state.c,
            s.class.name(),
            s.delay_length
        );
    }
    println!("course outcome: {:?}, delay {:.1?} days", journey.report.class, journey.report.delay_length);

    let th = JourneyThresholds::locate(&patient, (0.0089, 0.0092), (37.38, 37.43), 1e-6, &settings)?;
    println!(
        "\nbeta_hat = {:.8} (band {:.2e}), gamma_hat = {:.5} (band {:.4})",
        th.beta_hat, th.beta_band, th.gamma_hat, th.gamma_band
    );
    let (b0, g0) = (patient.beta, patient.gamma);
    let delayed = (th.beta_hat + 0.25 * th.beta_band, g0);
    let pairs = [
        ((b0, g0), (b0 + 0.5 * (th.beta_hat - b0), g0)),
        ((b0, g0), (th.beta_hat + 0.5 * th.beta_band, g0)),
        ((b0, g0), (th.beta_hat + 3.0 * th.beta_band, g0)),
        (delayed, (th.beta_hat + 0.75 * th.beta_band, g0)),
        (delayed, (delayed.0, th.gamma_hat - 3.0 * th.gamma_band)),
    ];
    for (pre, post) in pairs {
        let case = journey_case(pre, post, &th).map_or('-', |c| c.label());
        let after = settings.evaluate(&patient.with(ParamId::Beta, post.0).with(ParamId::Gamma, post.1))?;
        println!(
            "({case}) ({:.8}, {:.4}) -> ({:.8}, {:.4}): {}",
            pre.0,
            pre.1,
            post.0,
            post.1,
            after.class.name()
        );
    }
    Ok(())
}
