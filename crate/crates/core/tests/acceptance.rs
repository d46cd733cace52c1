//! Acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so every verdict is printed
//! even when all pass. Exits non-zero if any criterion fails.

use std::cell::RefCell;
use std::process::ExitCode;

use icbsim::calibration::{fit_delay, resolve_rc, FitSpec, PUBLISHED_DELAYS, TREATMENT_SETTINGS};
use icbsim::dosing::{journey_case, simulate_with_doses, Dose, DoseSchedule, JourneyCase, JourneyThresholds};
use icbsim::experiments::{bisect, delayed_band, find_threshold, oat_sensitivity, RelChange};
use icbsim::integrator::integrate;
use icbsim::metrics::{cycle_periods, RunSettings};
use icbsim::{
    baseline_params, IntegratorConfig, MetricsConfig, ModelParams, ParamId, ResponseClass, ResponseReport,
    StateVector, Trajectory,
};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

type Outcome = Result<String, String>;

thread_local! {
    /// Smallest state component seen on any trajectory produced here.
    static MIN_COMPONENT: RefCell<(f64, usize)> = const { RefCell::new((f64::INFINITY, 0)) };
}

fn record(traj: &Trajectory) {
    let min = traj.states.iter().flat_map(|s| s.to_array()).fold(f64::INFINITY, f64::min);
    MIN_COMPONENT.with(|m| {
        let mut m = m.borrow_mut();
        m.0 = m.0.min(min);
        m.1 += 1;
    });
}

fn run(params: &ModelParams, settings: &RunSettings) -> Result<(Trajectory, ResponseReport), String> {
    let (traj, report) = settings.simulate(params).map_err(|e| e.to_string())?;
    record(&traj);
    Ok((traj, report))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn with_beta_gamma(beta: f64, gamma: f64) -> ModelParams {
    baseline_params().with(ParamId::Beta, beta).with(ParamId::Gamma, gamma)
}

fn criterion_1() -> Outcome {
    let p = baseline_params();
    let (traj, _) = run(&p, &RunSettings::default())?;
    let total = p.e_star + p.s_star;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut at_20 = f64::NAN;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let dev = (s.e + s.s - total).abs();
        worst_excess = worst_excess.max(dev - (5.0 * (-t).exp() + 1e-6));
        if (t - 20.0).abs() < 1e-9 {
            at_20 = dev;
        }
    }
    check(
        worst_excess <= 0.0 && at_20 < 1e-6,
        format!("max(|E+S-10| - bound) = {worst_excess:.3e}, deviation at t=20: {at_20:.3e}"),
    )
}

fn criterion_2() -> Outcome {
    let p = baseline_params().with(ParamId::Beta, 0.0).with(ParamId::Gamma, 0.0);
    let s0 = StateVector::new(0.0, 1.0, 1.0, p.e_star, p.s_star);
    // I(10) is about 1e-13, so relative accuracy needs an absolute tolerance below that
    let config = IntegratorConfig { abs_tol: [1e-20; 5], ..IntegratorConfig::default() };
    let traj = integrate(&p, s0, 0.0, 10.0, &config).map_err(|e| e.to_string())?;
    record(&traj);
    let mut worst: f64 = 0.0;
    for t in [1.0, 5.0, 10.0] {
        let s = traj.eval(t);
        worst = worst.max((s.a / (-p.delta_a * t).exp() - 1.0).abs());
        worst = worst.max((s.i / (-p.delta_i * t).exp() - 1.0).abs());
    }
    check(worst < 1e-6, format!("max relative error of A, I at t = 1, 5, 10: {worst:.3e}"))
}

fn criterion_3() -> Outcome {
    let cases = [
        ("no response", with_beta_gamma(0.0089988, 37.4168), ResponseClass::NoResponse),
        ("quick full", with_beta_gamma(0.009, 37.4168).with(ParamId::EStar, 5.5), ResponseClass::QuickFull),
        ("quick partial", with_beta_gamma(0.0089988, 37.414).with(ParamId::RMax, 1.0), ResponseClass::QuickPartial),
        ("delayed", with_beta_gamma(0.009, 37.414), ResponseClass::Delayed),
    ];
    let settings = RunSettings::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, p, want) in cases {
        let (_, r) = run(&p, &settings)?;
        ok &= r.class == want;
        parts.push(format!("{name}: {:?} (want {want:?}, delay {:?})", r.class, r.delay_length));
    }
    check(ok, parts.join("; "))
}

fn criterion_4() -> Outcome {
    let settings = RunSettings::default();
    let res = resolve_rc(PUBLISHED_DELAYS, &[1.0, 30.0], &baseline_params(), &settings).map_err(|e| e.to_string())?;
    if res.best_r_c != baseline_params().r_c {
        return Err(format!("resolved r_C = {} differs from the default", res.best_r_c));
    }
    let mut delays = [f64::NAN; 3];
    for (slot, &(beta, gamma)) in delays.iter_mut().zip(&TREATMENT_SETTINGS) {
        let (_, r) = run(&with_beta_gamma(beta, gamma), &settings)?;
        *slot = r.delay_length.unwrap_or(f64::INFINITY);
    }
    let [ctla4, pd1, combo] = delays;
    let within = |d: f64, t: f64| (d - t).abs() <= 0.25 * t;
    check(
        combo < pd1 && pd1 < ctla4 && within(ctla4, 150.0) && within(pd1, 120.0) && within(combo, 60.0),
        format!("r_C = {}; delays: inhibitor 1 {ctla4:.2}, inhibitor 2 {pd1:.2}, combination {combo:.2} days", res.best_r_c),
    )
}

fn criterion_5() -> Outcome {
    let p = baseline_params();
    let (_, r) = run(&p, &RunSettings::default())?;
    let dormancy = r.dormancy_length.unwrap_or(f64::NAN);
    let three_years = RunSettings { metrics: MetricsConfig::default().with_horizon(3.0 * 365.0), ..Default::default() };
    let (traj, _) = run(&p, &three_years)?;
    let periods = cycle_periods(&traj, &three_years.metrics);
    let mean = periods.iter().sum::<f64>() / periods.len() as f64;
    let spread = periods.iter().map(|x| (x - mean).abs() / mean).fold(0.0, f64::max);
    check(
        (dormancy - 180.0).abs() <= 60.0 && periods.len() >= 2 && spread <= 0.05,
        format!("dormancy {dormancy:.2} days; {} periods over 3 years {periods:.2?}, max deviation {:.3}%", periods.len(), spread * 100.0),
    )
}

fn criterion_6() -> Outcome {
    use ParamId::*;
    let rows = oat_sensitivity(&baseline_params(), 0.01, &RunSettings::default()).map_err(|e| e.to_string())?;
    let lengthen = [Kappa, DeltaA, DeltaI, SStar, Gamma];
    let shorten = [RC, CStar, RA, RI, RE, EStar, Beta];
    let mut bad = Vec::new();
    for row in &rows {
        let dd = row.delta_delay.value();
        if let Some(e) = &row.error {
            bad.push(format!("{}: {e}", row.param));
            continue;
        }
        if lengthen.contains(&row.param) && !dd.is_some_and(|v| v > 0.0) {
            bad.push(format!("{} should lengthen, got {:?}", row.param, row.delta_delay));
        }
        if shorten.contains(&row.param) && !dd.is_some_and(|v| v < 0.0) {
            bad.push(format!("{} should shorten, got {:?}", row.param, row.delta_delay));
        }
        if matches!(row.param, Beta | Gamma) && !dd.is_some_and(|v| v.abs() >= 0.25) {
            bad.push(format!("|delta_delay({})| < 25%", row.param));
        }
        // Dormancy bound applies where the perturbed run has a measurable dormancy.
        if row.param != RMax {
            if let RelChange::Finite(v) = row.delta_dormancy {
                if v.abs() > 0.10 {
                    bad.push(format!("|delta_dormancy({})| = {:.1}%", row.param, v * 100.0));
                }
            }
        }
    }
    let summary: Vec<String> = rows
        .iter()
        .map(|r| match r.delta_delay {
            RelChange::Finite(v) => format!("{} {:+.0}%", r.param, v * 100.0),
            RelChange::Infinite => format!("{} +inf", r.param),
            RelChange::Undefined => format!("{} n/a", r.param),
        })
        .collect();
    let detail = format!("delta_delay: {}", summary.join(", "));
    if bad.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; violations: {}", bad.join("; ")))
    }
}

fn criterion_7() -> Outcome {
    let settings = RunSettings::default();
    let base = baseline_params();
    let th = find_threshold(&base, ParamId::Gamma, 37.40, 37.45, 1e-4, &settings).map_err(|e| e.to_string())?;
    let pair = (ResponseClass::Delayed, ResponseClass::NoResponse);
    let band = delayed_band(&base, ParamId::Gamma, 37.40, 37.45, 1e-5, &settings).map_err(|e| e.to_string())?;
    let rel = band.width / band.no_response_edge;
    check(
        (37.41..=37.43).contains(&th.critical_value) && th.bracket_width <= 1e-4 && th.side_classes == pair && rel < 1e-3,
        format!(
            "critical gamma {:.5} ({:?} | {:?}); delayed band width {:.5} = {:.4}% of critical value",
            th.critical_value,
            th.side_classes.0,
            th.side_classes.1,
            band.width,
            rel * 100.0
        ),
    )
}

fn criterion_8() -> Outcome {
    let p = baseline_params();
    let settings = RunSettings::default();
    let (_, r) = run(&p, &settings)?;
    let tight = RunSettings { integrator: settings.integrator.scale_tolerances(0.5), ..settings.clone() };
    let (_, r_tight) = run(&p, &tight)?;
    let (d, d_tight) = (r.delay_length.unwrap_or(f64::NAN), r_tight.delay_length.unwrap_or(f64::NAN));
    let rel = ((d_tight - d) / d).abs();
    let window = r.effector_window.unwrap_or(f64::NAN);
    let (min, runs) = MIN_COMPONENT.with(|m| *m.borrow());
    check(
        rel < 1e-3 && min >= 0.0 && window < 2.0,
        format!(
            "delay {d:.4} vs {d_tight:.4} at half tolerance ({:.2e} relative); min component over {runs} runs = {min:.3e}; effector window {window:.3} days",
            rel
        ),
    )
}

fn criterion_9() -> Outcome {
    let spec = FitSpec {
        bounds: vec![(0.0089, 0.0091), (37.40, 37.43)],
        ..FitSpec::beta_gamma((0.00899, 37.4145), 60.0)
    };
    let fit = fit_delay(&spec, &baseline_params(), &RunSettings::default()).map_err(|e| e.to_string())?;
    let achieved = fit.achieved_delay.unwrap_or(f64::INFINITY);
    check(
        fit.converged && (achieved - 60.0).abs() <= 1.0 && fit.evals <= 500,
        format!(
            "beta {:.8}, gamma {:.6} -> delay {achieved:.3} days in {} evaluations",
            fit.fitted.beta, fit.fitted.gamma, fit.evals
        ),
    )
}

fn max_rel_diff(a: &Trajectory, b: &Trajectory) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .flat_map(|(x, y)| x.to_array().into_iter().zip(y.to_array()))
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

fn criterion_10() -> Outcome {
    let settings = RunSettings::default();
    let horizon = settings.metrics.horizon;
    let patient = with_beta_gamma(0.0089988, 37.4168);
    let s0 = settings.initial_state(&patient);

    let (plain, _) = run(&patient, &settings)?;
    let (empty, _) =
        simulate_with_doses(&patient, s0, &DoseSchedule::empty(), horizon, &settings).map_err(|e| e.to_string())?;
    record(&empty);
    let same_grid = plain.times == empty.times && plain.states == empty.states;

    let dose = Dose::new(0.0, 0.0000012, 0.0028);
    let (dosed, _) = simulate_with_doses(&patient, s0, &DoseSchedule::new(vec![dose]).unwrap(), horizon, &settings)
        .map_err(|e| e.to_string())?;
    record(&dosed);
    let (direct, _) = run(&dose.apply(&patient), &settings)?;
    let t0_diff = if dosed.times == direct.times { max_rel_diff(&dosed, &direct) } else { f64::INFINITY };

    let th = JourneyThresholds::locate(&patient, (0.0089, 0.0092), (37.38, 37.43), 1e-6, &settings)
        .map_err(|e| e.to_string())?;
    let (b_hat, w_b, g_hat, w_g) = (th.beta_hat, th.beta_band, th.gamma_hat, th.gamma_band);
    let (b0, g0) = (patient.beta, patient.gamma);
    let delayed_pt = (b_hat + 0.25 * w_b, g0);
    let pairs = [
        (JourneyCase::A, (b0, g0), (b0 + 0.5 * (b_hat - b0), g0)),
        (JourneyCase::B, (b0, g0), (b_hat + 0.5 * w_b, g0)),
        (JourneyCase::C, (b0, g0), (b_hat + 3.0 * w_b, g0)),
        (JourneyCase::D, delayed_pt, (b_hat + 0.75 * w_b, g0)),
        (JourneyCase::E, delayed_pt, (b_hat + 0.25 * w_b, g_hat - 3.0 * w_g)),
    ];
    let region_class = |pt: (f64, f64)| -> Result<ResponseClass, String> {
        let (_, r) = run(&patient.with(ParamId::Beta, pt.0).with(ParamId::Gamma, pt.1), &settings)?;
        Ok(r.class)
    };
    let mut labels_ok = true;
    let mut labels = Vec::new();
    for (want, pre, post) in pairs {
        let got = journey_case(pre, post, &th);
        // the rectangular region rule must agree with simulation at both ends
        let classes = (region_class(pre)?, region_class(post)?);
        let simulated = match classes {
            (ResponseClass::NoResponse, ResponseClass::NoResponse) => Some(JourneyCase::A),
            (ResponseClass::NoResponse, ResponseClass::Delayed) => Some(JourneyCase::B),
            (ResponseClass::NoResponse, c) if c.is_quick() => Some(JourneyCase::C),
            (ResponseClass::Delayed, ResponseClass::Delayed) => Some(JourneyCase::D),
            (ResponseClass::Delayed, c) if c.is_quick() => Some(JourneyCase::E),
            _ => None,
        };
        labels_ok &= got == Some(want) && simulated == Some(want);
        labels.push(format!("{}:{}", want.label(), got.map_or('-', |c| c.label())));
    }
    check(
        same_grid && t0_diff < 1e-6 && labels_ok,
        format!(
            "empty schedule identical: {same_grid}; t=0 dose max relative difference {t0_diff:.2e}; cases {}",
            labels.join(" ")
        ),
    )
}

fn criterion_11() -> Outcome {
    let settings = RunSettings::default();
    let base = baseline_params();

    let mut runner = TestRunner::deterministic();
    let factors = proptest::collection::vec(0.9f64..=1.1, ParamId::ALL.len());
    let mut tally = [0usize; 4];
    for _ in 0..200 {
        let f = factors.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        let mut p = base;
        for (id, k) in ParamId::ALL.iter().zip(&f) {
            p.set(*id, base.get(*id) * k);
        }
        let (_, r1) = run(&p, &settings).map_err(|e| format!("totality: {p:?}: {e}"))?;
        let (_, r2) = run(&p, &settings)?;
        if r1 != r2 {
            return Err(format!("non-deterministic report for {p:?}"));
        }
        tally[ResponseClass::ALL.iter().position(|c| *c == r1.class).unwrap()] += 1;
    }

    let ray = |id: ParamId, span: f64| -> Result<Vec<f64>, String> {
        (0..10)
            .map(|k| {
                let x = base.get(id) * (1.0 + span * (k as f64 / 9.0 - 0.5));
                let (_, r) = run(&base.with(id, x), &settings)?;
                Ok(r.delay_length.unwrap_or(f64::INFINITY))
            })
            .collect()
    };
    let beta_ray = ray(ParamId::Beta, 1e-3)?;
    let gamma_ray = ray(ParamId::Gamma, 2e-4)?;
    let beta_ok = beta_ray.windows(2).all(|w| w[1] <= w[0]);
    let gamma_ok = gamma_ray.windows(2).all(|w| w[1] >= w[0]);

    let mut bisect_ok = true;
    for k in 0..500 {
        let c = -3.0 + 6.0 * (k as f64 + 0.5) / 500.0;
        let (lo, hi) = bisect(-3.0, 3.0, 1e-9, |x| Ok(x >= c)).map_err(|e| e.to_string())?;
        bisect_ok &= lo < c && c <= hi && hi - lo <= 1e-9;
    }

    let classes: Vec<String> =
        ResponseClass::ALL.iter().zip(tally).map(|(c, n)| format!("{} {n}", c.name())).collect();
    check(
        beta_ok && gamma_ok && bisect_ok,
        format!(
            "200 random sets classified deterministically ({}); beta ray {beta_ray:.1?}; gamma ray {gamma_ray:.1?}; bisection ok: {bisect_ok}",
            classes.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("conservation transient", criterion_1),
        ("decoupled analytic oracle", criterion_2),
        ("response types", criterion_3),
        ("delay values and synergy", criterion_4),
        ("dormancy and cycles", criterion_5),
        ("sensitivity signs", criterion_6),
        ("critical threshold", criterion_7),
        ("integrator robustness", criterion_8),
        ("calibration round-trip", criterion_9),
        ("dosing equivalences", criterion_10),
        ("property suite", criterion_11),
    ];
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let (verdict, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {verdict}: {name}: {detail}", n + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

