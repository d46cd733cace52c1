//! Checkpoint-blockade doses as instantaneous, permanent steps in
//! `(beta, gamma)`.
//!
//! A CTLA-4 blockade raises `beta` by `delta_beta`; a PD-1 blockade lowers
//! `gamma` by `delta_gamma` (floored at zero). The state is never touched by
//! a dose, only the parameters the integration continues with.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::delayed_band;
use crate::integrator::{integrate_on, uniform_grid, Termination, Trajectory};
use crate::metrics::{classify, ResponseClass, ResponseReport, RunSettings};
use crate::model::{ModelParams, ParamId, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dose {
    pub time: f64,
    #[serde(default)]
    pub delta_beta: f64,
    #[serde(default)]
    pub delta_gamma: f64,
}

impl Dose {
    pub fn new(time: f64, delta_beta: f64, delta_gamma: f64) -> Self {
        Self { time, delta_beta, delta_gamma }
    }

    /// Parameters after this dose.
    pub fn apply(&self, params: &ModelParams) -> ModelParams {
        let mut p = *params;
        p.beta += self.delta_beta;
        p.gamma = (p.gamma - self.delta_gamma).max(0.0);
        p
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DoseSchedule {
    pub doses: Vec<Dose>,
}

impl DoseSchedule {
    pub fn new(doses: Vec<Dose>) -> Result<Self> {
        let s = Self { doses };
        s.validate()?;
        Ok(s)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// `count` identical doses, `interval` days apart, starting at `first`.
    pub fn repeated(first: f64, interval: f64, count: usize, delta_beta: f64, delta_gamma: f64) -> Result<Self> {
        Self::new((0..count).map(|k| Dose::new(first + k as f64 * interval, delta_beta, delta_gamma)).collect())
    }

    pub fn validate(&self) -> Result<()> {
        for d in &self.doses {
            if !(d.time >= 0.0 && d.time.is_finite()) {
                return Err(Error::Schedule(format!("dose time {} must be finite and >= 0", d.time)));
            }
            if !(d.delta_beta >= 0.0 && d.delta_gamma >= 0.0) {
                return Err(Error::Schedule("dose deltas must be >= 0".into()));
            }
        }
        if self.doses.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::Schedule("dose times must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Parameters and prospective response at one point of a treatment course.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub time: f64,
    pub beta: f64,
    pub gamma: f64,
    pub state: StateVector,
    /// Response the current parameters would produce from `state`.
    pub class: ResponseClass,
    pub delay_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JourneyReport {
    /// Pre-treatment snapshot followed by one per dose.
    pub snapshots: Vec<Snapshot>,
    pub final_params: ModelParams,
    pub report: ResponseReport,
}

fn snapshot(time: f64, params: &ModelParams, state: StateVector, settings: &RunSettings) -> Result<Snapshot> {
    let (_, report) = crate::metrics::simulate_and_classify(params, state, &settings.integrator, &settings.metrics)?;
    Ok(Snapshot {
        time,
        beta: params.beta,
        gamma: params.gamma,
        state,
        class: report.class,
        delay_length: report.delay_length,
    })
}

/// Integrates piecewise over `[0, horizon]`, switching parameters at each
/// dose. Samples sit on the same uniform grid a plain run would use.
pub fn simulate_with_doses(
    patient: &ModelParams,
    state0: StateVector,
    schedule: &DoseSchedule,
    horizon: f64,
    settings: &RunSettings,
) -> Result<(Trajectory, JourneyReport)> {
    schedule.validate()?;
    if let Some(d) = schedule.doses.iter().find(|d| d.time >= horizon) {
        return Err(Error::Schedule(format!("dose at t = {} is not before the horizon {horizon}", d.time)));
    }
    let trajectory = run_segments(patient, state0, schedule, horizon, settings)?;

    let mut snapshots = Vec::with_capacity(schedule.doses.len() + 1);
    snapshots.push(snapshot(0.0, patient, state0, settings)?);
    let mut params = *patient;
    for dose in &schedule.doses {
        params = dose.apply(&params);
        let state = state_at(&trajectory, dose.time);
        snapshots.push(snapshot(dose.time, &params, state, settings)?);
    }
    let report = classify(&trajectory, &settings.metrics);
    Ok((trajectory, JourneyReport { snapshots, final_params: params, report }))
}

fn state_at(traj: &Trajectory, t: f64) -> StateVector {
    match traj.times.binary_search_by(|x| x.total_cmp(&t)) {
        Ok(k) => traj.states[k],
        Err(_) => traj.eval(t),
    }
}

fn run_segments(
    patient: &ModelParams,
    state0: StateVector,
    schedule: &DoseSchedule,
    horizon: f64,
    settings: &RunSettings,
) -> Result<Trajectory> {
    let grid = uniform_grid(0.0, horizon, settings.integrator.output_dt);
    let mut ends: Vec<f64> = schedule.doses.iter().map(|d| d.time).collect();
    ends.push(horizon);

    let mut params = *patient;
    let mut state = state0;
    let mut t_start = 0.0;
    let mut out: Option<Trajectory> = None;
    for (segment, &t_end) in ends.iter().enumerate() {
        let is_last = segment + 1 == ends.len();
        if t_end > t_start || is_last {
            let mut samples: Vec<f64> = grid
                .iter()
                .copied()
                .filter(|&t| t >= t_start && (t < t_end || (is_last && t <= t_end)))
                .collect();
            if !is_last {
                samples.push(t_end);
            }
            let wrap = |e: Error| Error::Segment { segment, source: Box::new(e) };
            let mut piece =
                integrate_on(&params, state, t_start, t_end, &settings.integrator, samples).map_err(wrap)?;
            if let Termination::StepFailure { t, reason } = &piece.termination {
                return Err(wrap(Error::StepFailure { t: *t, reason: reason.clone() }));
            }
            if !is_last {
                piece.times.pop();
                state = piece.states.pop().expect("segment end sample");
            }
            match out.as_mut() {
                Some(traj) => traj.append(piece),
                None => out = Some(piece),
            }
        }
        if let Some(dose) = schedule.doses.get(segment) {
            params = dose.apply(&params);
        }
        t_start = t_end;
    }
    let mut traj = out.expect("at least one segment");
    traj.params = Some(params);
    Ok(traj)
}

/// Outcome of moving a patient from `pre` to `post` in the
/// `(beta, gamma)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JourneyCase {
    /// No response before or after.
    A,
    /// No response before, delayed response after.
    B,
    /// No response before, quick response after.
    C,
    /// Delayed before and after.
    D,
    /// Delayed before, quick after.
    E,
}

impl JourneyCase {
    pub fn label(self) -> char {
        match self {
            JourneyCase::A => 'a',
            JourneyCase::B => 'b',
            JourneyCase::C => 'c',
            JourneyCase::D => 'd',
            JourneyCase::E => 'e',
        }
    }
}

/// Location of the delayed band along `beta` and `gamma`.
///
/// No response for `beta < beta_hat` and `gamma > gamma_hat`; delayed inside
/// `[beta_hat, beta_hat + beta_band)` or `(gamma_hat - gamma_band, gamma_hat]`;
/// quick beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JourneyThresholds {
    pub beta_hat: f64,
    pub beta_band: f64,
    pub gamma_hat: f64,
    pub gamma_band: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    NoResponse,
    Delayed,
    Quick,
}

impl JourneyThresholds {
    /// Measures both bands through `base` by bisection.
    pub fn locate(
        base: &ModelParams,
        beta_bracket: (f64, f64),
        gamma_bracket: (f64, f64),
        resolution: f64,
        settings: &RunSettings,
    ) -> Result<Self> {
        let b = delayed_band(base, ParamId::Beta, beta_bracket.0, beta_bracket.1, resolution * base.beta, settings)?;
        let g = delayed_band(base, ParamId::Gamma, gamma_bracket.0, gamma_bracket.1, resolution * base.gamma, settings)?;
        Ok(Self { beta_hat: b.no_response_edge, beta_band: b.width, gamma_hat: g.no_response_edge, gamma_band: g.width })
    }

    pub fn region(&self, (beta, gamma): (f64, f64)) -> Region {
        if beta >= self.beta_hat + self.beta_band || gamma <= self.gamma_hat - self.gamma_band {
            Region::Quick
        } else if beta < self.beta_hat && gamma > self.gamma_hat {
            Region::NoResponse
        } else {
            Region::Delayed
        }
    }
}

/// Labels a dose transition; `None` for moves outside the five cases
/// (starting quick, or moving backwards).
pub fn journey_case(pre: (f64, f64), post: (f64, f64), thresholds: &JourneyThresholds) -> Option<JourneyCase> {
    use Region::*;
    match (thresholds.region(pre), thresholds.region(post)) {
        (NoResponse, NoResponse) => Some(JourneyCase::A),
        (NoResponse, Delayed) => Some(JourneyCase::B),
        (NoResponse, Quick) => Some(JourneyCase::C),
        (Delayed, Delayed) => Some(JourneyCase::D),
        (Delayed, Quick) => Some(JourneyCase::E),
        _ => None,
    }
}
