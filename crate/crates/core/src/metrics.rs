//! Clinical read-outs and response classification.
//!
//! All times are measured from the first sample of the trajectory, which is
//! taken to be the start of treatment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{find_crossing, find_crossing_by, integrate, Direction, IntegratorConfig, Trajectory};
use crate::model::{Component, ModelParams, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResponseClass {
    NoResponse,
    QuickFull,
    QuickPartial,
    Delayed,
}

impl ResponseClass {
    pub const ALL: [ResponseClass; 4] = [
        ResponseClass::NoResponse,
        ResponseClass::QuickFull,
        ResponseClass::QuickPartial,
        ResponseClass::Delayed,
    ];

    pub fn is_quick(self) -> bool {
        matches!(self, ResponseClass::QuickFull | ResponseClass::QuickPartial)
    }

    pub fn name(self) -> &'static str {
        match self {
            ResponseClass::NoResponse => "NoResponse",
            ResponseClass::QuickFull => "QuickFull",
            ResponseClass::QuickPartial => "QuickPartial",
            ResponseClass::Delayed => "Delayed",
        }
    }
}

/// Thresholds that turn a trajectory into clinical quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Fraction of `C(0)` whose downward crossing marks the response.
    pub response_frac: f64,
    /// Delays longer than this (days) count as delayed.
    pub quick_cutoff: f64,
    /// Fraction of `C*` below which the tumour counts as suppressed.
    pub eradication_frac: f64,
    /// `(lo, hi)` fractions of `C*` bounding a partial steady state.
    pub partial_band: (f64, f64),
    /// Length of the trailing window used for steadiness, days.
    pub steadiness_window: f64,
    /// Bound on `(max - min) / mean` of `C` over that window.
    pub steadiness_rel_var: f64,
    /// Observation horizon, days.
    pub horizon: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            response_frac: 0.5,
            quick_cutoff: 30.0,
            eradication_frac: 0.01,
            partial_band: (0.05, 0.95),
            steadiness_window: 100.0,
            steadiness_rel_var: 0.01,
            horizon: 3650.0,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.partial_band;
        if !(0.0 < self.eradication_frac && self.eradication_frac < lo && lo < hi && hi < 1.0) {
            return Err(Error::MetricsConfig(
                "need 0 < eradication_frac < partial_band.lo < partial_band.hi < 1".into(),
            ));
        }
        if !(self.response_frac > 0.0 && self.response_frac < 1.0) {
            return Err(Error::MetricsConfig("response_frac must lie in (0, 1)".into()));
        }
        if !(self.quick_cutoff > 0.0 && self.quick_cutoff < self.horizon && self.horizon.is_finite()) {
            return Err(Error::MetricsConfig("need 0 < quick_cutoff < horizon".into()));
        }
        if !(self.steadiness_window > 0.0 && self.steadiness_rel_var > 0.0) {
            return Err(Error::MetricsConfig("steadiness settings must be positive".into()));
        }
        Ok(())
    }

    pub fn with_horizon(&self, horizon: f64) -> Self {
        Self { horizon, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseReport {
    pub class: ResponseClass,
    pub delay_length: Option<f64>,
    pub dormancy_length: Option<f64>,
    pub post_treatment_size: Option<f64>,
    pub cycle_period: Option<f64>,
    pub effector_window: Option<f64>,
}

/// Carrying capacity used for the `C*`-relative thresholds.
///
/// Falls back to `C(0)` for trajectories without recorded parameters.
fn c_star(traj: &Trajectory) -> f64 {
    traj.params.map_or(traj.initial().c, |p| p.c_star)
}

fn within_horizon(traj: &Trajectory, cfg: &MetricsConfig, t: f64) -> Option<f64> {
    let rel = t - traj.t0();
    (rel <= cfg.horizon).then_some(rel)
}

/// Time from treatment start to the first drop of `C` below
/// `response_frac * C(0)`.
pub fn delay_length(traj: &Trajectory, cfg: &MetricsConfig) -> Option<f64> {
    let level = cfg.response_frac * traj.initial().c;
    let t = find_crossing(traj, Component::C, level, Direction::Downward, traj.t0())?;
    within_horizon(traj, cfg, t)
}

/// Time from the first entry into the eradication band until `C` climbs
/// back through `response_frac * C*`.
pub fn dormancy_length(traj: &Trajectory, cfg: &MetricsConfig) -> Option<f64> {
    let cs = c_star(traj);
    let t_in = find_crossing(traj, Component::C, cfg.eradication_frac * cs, Direction::Downward, traj.t0())?;
    let t_out = find_crossing(traj, Component::C, cfg.response_frac * cs, Direction::Upward, t_in)?;
    within_horizon(traj, cfg, t_out)?;
    Some(t_out - t_in)
}

/// Mean of `C` over the trailing steadiness window when the tumour has
/// settled inside the partial band.
pub fn post_treatment_size(traj: &Trajectory, cfg: &MetricsConfig) -> Option<f64> {
    let t_end = traj.t_end().min(traj.t0() + cfg.horizon);
    let start = t_end - cfg.steadiness_window;
    if start < traj.t0() {
        return None;
    }
    let window: Vec<f64> = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(&t, _)| t >= start && t <= t_end)
        .map(|(_, s)| s.c)
        .collect();
    if window.len() < 2 {
        return None;
    }
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = window.iter().copied().fold(f64::INFINITY, f64::min);
    if mean <= 0.0 || (max - min) / mean >= cfg.steadiness_rel_var {
        return None;
    }
    let cs = c_star(traj);
    let (lo, hi) = cfg.partial_band;
    (mean > lo * cs && mean < hi * cs).then_some(mean)
}

/// Spacings between consecutive downward crossings of `response_frac * C*`.
pub fn cycle_periods(traj: &Trajectory, cfg: &MetricsConfig) -> Vec<f64> {
    let level = cfg.response_frac * c_star(traj);
    let mut crossings = Vec::new();
    let mut after = traj.t0();
    while let Some(t) = find_crossing(traj, Component::C, level, Direction::Downward, after) {
        if within_horizon(traj, cfg, t).is_none() {
            break;
        }
        crossings.push(t);
        // resume from the far end of the bracket that contained `t`
        match traj.times.get(traj.times.partition_point(|&x| x <= t)) {
            Some(&next) => after = next,
            None => break,
        }
    }
    crossings.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Mean relapse cycle length; needs at least two downward crossings.
pub fn cycle_period(traj: &Trajectory, cfg: &MetricsConfig) -> Option<f64> {
    let periods = cycle_periods(traj, cfg);
    (!periods.is_empty()).then(|| periods.iter().sum::<f64>() / periods.len() as f64)
}

fn e_minus_s(s: &StateVector) -> f64 {
    s.e - s.s
}

/// Start and end of the first maximal interval with `E > S`.
pub fn effector_interval(traj: &Trajectory, cfg: &MetricsConfig) -> Option<(f64, f64)> {
    let start = if e_minus_s(&traj.initial()) > 0.0 {
        traj.t0()
    } else {
        find_crossing_by(traj, e_minus_s, 0.0, Direction::Upward, traj.t0())?
    };
    within_horizon(traj, cfg, start)?;
    let end = find_crossing_by(traj, e_minus_s, 0.0, Direction::Downward, start).unwrap_or(traj.t_end());
    Some((start, end))
}

/// Duration of the first maximal interval on which `E > S`.
pub fn effector_window(traj: &Trajectory, cfg: &MetricsConfig) -> Option<f64> {
    effector_interval(traj, cfg).map(|(a, b)| b - a)
}

/// Assigns one of the four response classes and fills the report fields
/// that apply to it.
pub fn classify(traj: &Trajectory, cfg: &MetricsConfig) -> ResponseReport {
    let effector_window = effector_window(traj, cfg);
    let Some(delay) = delay_length(traj, cfg) else {
        return ResponseReport {
            class: ResponseClass::NoResponse,
            delay_length: None,
            dormancy_length: None,
            post_treatment_size: None,
            cycle_period: None,
            effector_window,
        };
    };
    let partial = post_treatment_size(traj, cfg);
    let class = if delay > cfg.quick_cutoff {
        ResponseClass::Delayed
    } else if partial.is_some() {
        ResponseClass::QuickPartial
    } else {
        ResponseClass::QuickFull
    };
    let relapsing = class != ResponseClass::QuickPartial;
    ResponseReport {
        class,
        delay_length: Some(delay),
        dormancy_length: relapsing.then(|| dormancy_length(traj, cfg)).flatten(),
        post_treatment_size: if class == ResponseClass::QuickPartial { partial } else { None },
        cycle_period: relapsing.then(|| cycle_period(traj, cfg)).flatten(),
        effector_window,
    }
}

/// Integrates over `[0, cfg.horizon]` and classifies the result.
pub fn simulate_and_classify(
    params: &ModelParams,
    state0: StateVector,
    integ: &IntegratorConfig,
    cfg: &MetricsConfig,
) -> Result<(Trajectory, ResponseReport)> {
    cfg.validate()?;
    let traj = integrate(params, state0, 0.0, cfg.horizon, integ)?;
    if let crate::integrator::Termination::StepFailure { t, reason } = &traj.termination {
        return Err(Error::StepFailure { t: *t, reason: reason.clone() });
    }
    let report = classify(&traj, cfg);
    Ok((traj, report))
}

/// Everything besides the parameters needed to turn a parameter set into a
/// response: initial signal level, integrator settings and metric
/// thresholds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    pub signal_seed: Option<f64>,
    pub integrator: IntegratorConfig,
    pub metrics: MetricsConfig,
}

impl RunSettings {
    pub fn signal_seed(&self) -> f64 {
        self.signal_seed.unwrap_or(crate::model::DEFAULT_SIGNAL_SEED)
    }

    /// Pre-treatment state for `params`.
    pub fn initial_state(&self, params: &ModelParams) -> StateVector {
        crate::model::initial_state(params, self.signal_seed())
    }

    /// Simulates `params` from its pre-treatment state over the metrics
    /// horizon.
    pub fn simulate(&self, params: &ModelParams) -> Result<(Trajectory, ResponseReport)> {
        simulate_and_classify(params, self.initial_state(params), &self.integrator, &self.metrics)
    }

    /// Response report only; the trajectory is dropped.
    pub fn evaluate(&self, params: &ModelParams) -> Result<ResponseReport> {
        self.simulate(params).map(|(_, r)| r)
    }
}
