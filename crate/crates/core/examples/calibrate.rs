//! Fit (beta, gamma) to a 60-day delay, then check which growth rate r_C
//! reproduces the 5 / 4 / 2 month treatment delays.
//!
//! cargo run --release --example calibrate

use icbsim::calibration::{fit_delay, resolve_rc, FitSpec, PUBLISHED_DELAYS};
use icbsim::metrics::RunSettings;
use icbsim::baseline_params;

fn main() -> icbsim::Result<()> {
    let settings = RunSettings::default();
    let base = baseline_params();

    let spec = FitSpec {
        bounds: vec![(0.0089, 0.0091), (37.40, 37.43)],
        ..FitSpec::beta_gamma((0.00899, 37.4145), 60.0)
    };
    let fit = fit_delay(&spec, &base, &settings)?;
    println!(
        "fit: beta = {:.8}, gamma = {:.6}, delay = {:.2?} days, {} evaluations, converged = {}",
        fit.fitted.beta, fit.fitted.gamma, fit.achieved_delay, fit.evals, fit.converged
    );

    let res = resolve_rc(PUBLISHED_DELAYS, &[1.0, 3.0, 10.0, 30.0], &base, &settings)?;
    println!("targets (days): {:?}", res.targets);
    for c in &res.candidates {
        let d: Vec<String> = c.delays.iter().map(|d| d.map_or("never".into(), |v| format!("{v:.1}"))).collect();
        println!("  r_C = {:>4}: delays [{}], score {:.4}", c.r_c, d.join(", "), c.score);
    }
    println!("best r_C = {}", res.best_r_c);
    Ok(())
}
