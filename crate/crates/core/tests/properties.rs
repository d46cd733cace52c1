use icbsim::integrator::integrate;
use icbsim::metrics::RunSettings;
use icbsim::{baseline_params, IntegratorConfig, MetricsConfig, ModelParams, ParamId, StateVector, Termination};
use proptest::prelude::*;

fn perturbed(factors: &[f64]) -> ModelParams {
    let base = baseline_params();
    let mut p = base;
    for (id, k) in ParamId::ALL.iter().zip(factors) {
        p.set(*id, base.get(*id) * k);
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn runs_stay_nonnegative(factors in proptest::collection::vec(0.9f64..1.1, ParamId::ALL.len())) {
        let p = perturbed(&factors);
        let settings = RunSettings { metrics: MetricsConfig::default().with_horizon(400.0), ..Default::default() };
        let (traj, _) = settings.simulate(&p).unwrap();
        prop_assert_eq!(&traj.termination, &Termination::ReachedHorizon);
        for s in &traj.states {
            prop_assert!(s.to_array().iter().all(|v| *v >= 0.0), "{:?}", s);
        }
    }

    #[test]
    fn classification_is_deterministic(factors in proptest::collection::vec(0.95f64..1.05, ParamId::ALL.len())) {
        let p = perturbed(&factors);
        let settings = RunSettings { metrics: MetricsConfig::default().with_horizon(600.0), ..Default::default() };
        prop_assert_eq!(settings.evaluate(&p).unwrap(), settings.evaluate(&p).unwrap());
    }

    #[test]
    fn conservation_of_t_cells(e0 in 0.0f64..10.0, s0 in 0.0f64..10.0) {
        // with r_E = r_S the sum relaxes exactly like a linear ODE
        let p = baseline_params();
        let state = StateVector::new(1000.0, 1.0, 1.0, e0, s0);
        let traj = integrate(&p, state, 0.0, 30.0, &IntegratorConfig::default()).unwrap();
        let total = p.e_star + p.s_star;
        for (t, y) in traj.times.iter().zip(&traj.states) {
            let exact = total + (e0 + s0 - total) * (-t).exp();
            prop_assert!((y.e + y.s - exact).abs() < 1e-6, "t = {}", t);
        }
    }
}

#[test]
fn error_shrinks_with_tolerance() {
    // decoupled problem with a known solution
    let p = baseline_params().with(ParamId::Beta, 0.0).with(ParamId::Gamma, 0.0);
    let s0 = StateVector::new(0.0, 1.0, 1.0, 5.0, 5.0);
    let err = |rel_tol: f64| {
        let cfg = IntegratorConfig { rel_tol, abs_tol: [1e-20; 5], ..Default::default() };
        let traj = integrate(&p, s0, 0.0, 5.0, &cfg).unwrap();
        let a = traj.last().a;
        (a / (-p.delta_a * 5.0).exp() - 1.0).abs()
    };
    let errors: Vec<f64> = [1e-4, 1e-6, 1e-8, 1e-10].into_iter().map(err).collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(errors[3] < 1e-8, "{errors:?}");
}

#[test]
fn halving_tolerance_barely_moves_delay() {
    let settings = RunSettings::default();
    let tight = RunSettings { integrator: settings.integrator.scale_tolerances(0.5), ..settings.clone() };
    let p = baseline_params().with(ParamId::Gamma, 37.412);
    let a = settings.evaluate(&p).unwrap().delay_length.unwrap();
    let b = tight.evaluate(&p).unwrap().delay_length.unwrap();
    assert!(((a - b) / a).abs() < 1e-3, "{a} vs {b}");
}
