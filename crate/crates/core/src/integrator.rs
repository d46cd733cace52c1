//! Adaptive Dormand-Prince 5(4) integration with dense output.
//!
//! Steps are controlled component-wise: a step is accepted when every
//! component's error estimate is below `abs_tol[k] + rel_tol * |y_k|`.
//! Reported samples lie on a uniform grid and are obtained from the
//! continuous extension of each accepted step, so the step sequence does not
//! depend on `output_dt`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rhs_array, Component, ModelParams, StateVector};

// The model is autonomous, so the stage nodes c_i never appear.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// Step-size controller (PI, Hairer & Wanner defaults).
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const PI_BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - PI_BETA * 0.75;

const N: usize = 5;
type Vec5 = [f64; N];

/// Numerical settings for [`integrate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    /// Absolute tolerance per component, ordered `C, A, I, E, S`.
    #[serde(with = "abs_tol_serde")]
    pub abs_tol: [f64; 5],
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
    /// Spacing of the reporting grid, days.
    pub output_dt: f64,
    /// Keep the per-step interpolants for crossing refinement.
    pub store_dense: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: [1e-9; 5],
            h_init: 1e-4,
            h_max: 1.0,
            h_min: 1e-10,
            max_steps: 20_000_000,
            output_dt: 0.05,
            store_dense: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::IntegratorConfig(m.to_string()));
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return bad("rel_tol must lie in (0, 1)");
        }
        if self.abs_tol.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return bad("abs_tol must be positive");
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return bad("need 0 < h_min <= h_init <= h_max");
        }
        if !(self.output_dt > 0.0 && self.output_dt.is_finite()) {
            return bad("output_dt must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        Ok(())
    }

    /// Copy with both tolerances multiplied by `factor`.
    pub fn scale_tolerances(&self, factor: f64) -> Self {
        let mut c = self.clone();
        c.rel_tol *= factor;
        for a in &mut c.abs_tol {
            *a *= factor;
        }
        c
    }

    pub fn with_output_dt(&self, dt: f64) -> Self {
        Self { output_dt: dt, ..self.clone() }
    }
}

mod abs_tol_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Scalar(f64),
        PerComponent([f64; 5]),
    }

    pub fn serialize<S: Serializer>(v: &[f64; 5], s: S) -> Result<S::Ok, S::Error> {
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; 5], D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Scalar(x) => [x; 5],
            Repr::PerComponent(v) => v,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Rejections caused by a negative component larger than its `abs_tol`.
    pub negativity_rejections: usize,
    pub rhs_evals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    ReachedHorizon,
    EventStop { t: f64 },
    StepFailure { t: f64, reason: String },
}

/// Continuous extension of one accepted step.
#[derive(Debug, Clone)]
pub(crate) struct DenseStep {
    t0: f64,
    h: f64,
    cont: [Vec5; 5],
}

impl DenseStep {
    fn eval(&self, t: f64) -> Vec5 {
        let s = if self.h == 0.0 { 0.0 } else { (t - self.t0) / self.h };
        let s1 = 1.0 - s;
        let c = &self.cont;
        std::array::from_fn(|k| c[0][k] + s * (c[1][k] + s1 * (c[2][k] + s * (c[3][k] + s1 * c[4][k]))))
    }
}

/// Time-ordered samples of a model run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub step_stats: StepStats,
    pub termination: Termination,
    /// Parameters in effect at the end of the run, when known.
    pub params: Option<ModelParams>,
    pub(crate) dense: Vec<DenseStep>,
}

impl Trajectory {
    /// A trajectory built from raw samples, interpolated linearly.
    pub fn from_samples(times: Vec<f64>, states: Vec<StateVector>) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::Config("times and states must be non-empty and of equal length".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("times must be strictly increasing".into()));
        }
        Ok(Self {
            times,
            states,
            step_stats: StepStats::default(),
            termination: Termination::ReachedHorizon,
            params: None,
            dense: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn initial(&self) -> StateVector {
        self.states[0]
    }

    pub fn last(&self) -> StateVector {
        *self.states.last().expect("trajectory is never empty")
    }

    pub fn reached_horizon(&self) -> bool {
        self.termination == Termination::ReachedHorizon
    }

    pub fn has_dense_output(&self) -> bool {
        !self.dense.is_empty()
    }

    pub fn component(&self, comp: Component) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(move |s| s.get(comp))
    }

    /// State at an arbitrary time in `[t0, t_end]`.
    ///
    /// Uses the stored step interpolants when present, otherwise linear
    /// interpolation between samples.
    pub fn eval(&self, t: f64) -> StateVector {
        let t = t.clamp(self.t0(), self.t_end());
        if !self.dense.is_empty() {
            let idx = self.dense.partition_point(|d| d.t0 + d.h < t).min(self.dense.len() - 1);
            return StateVector::from_array(self.dense[idx].eval(t));
        }
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            return self.states[0];
        }
        if k >= self.times.len() {
            return self.last();
        }
        let (ta, tb) = (self.times[k - 1], self.times[k]);
        let w = (t - ta) / (tb - ta);
        self.states[k - 1] * (1.0 - w) + self.states[k] * w
    }

    /// Appends `other`, dropping its first sample when it duplicates our
    /// last time. Used to stitch piecewise runs.
    pub(crate) fn append(&mut self, other: Trajectory) {
        let skip = usize::from(other.times.first() == self.times.last());
        self.times.extend_from_slice(&other.times[skip..]);
        self.states.extend_from_slice(&other.states[skip..]);
        self.dense.extend(other.dense);
        self.step_stats.accepted += other.step_stats.accepted;
        self.step_stats.rejected += other.step_stats.rejected;
        self.step_stats.negativity_rejections += other.step_stats.negativity_rejections;
        self.step_stats.rhs_evals += other.step_stats.rhs_evals;
        self.termination = other.termination;
        self.params = other.params;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Downward,
    Upward,
}

/// Earliest time after `after` at which `component` crosses `level` in the
/// given direction; `None` if it never does.
pub fn find_crossing(
    traj: &Trajectory,
    component: Component,
    level: f64,
    direction: Direction,
    after: f64,
) -> Option<f64> {
    find_crossing_by(traj, |s| s.get(component), level, direction, after)
}

/// [`find_crossing`] for an arbitrary scalar function of the state.
///
/// Brackets are detected on the samples; the crossing is then bisected on
/// the trajectory's interpolant to `1/1000` of the bracket width.
pub fn find_crossing_by<F>(traj: &Trajectory, f: F, level: f64, direction: Direction, after: f64) -> Option<f64>
where
    F: Fn(&StateVector) -> f64,
{
    let g = |s: &StateVector| f(s) - level;
    let crosses = |g0: f64, g1: f64| match direction {
        Direction::Downward => g0 > 0.0 && g1 <= 0.0,
        Direction::Upward => g0 < 0.0 && g1 >= 0.0,
    };
    let first = traj.times.partition_point(|&t| t <= after);
    if first >= traj.len() {
        return None;
    }
    let mut prev_t = if first == 0 { traj.times[0] } else { after };
    let mut prev_g = if first == 0 { g(&traj.states[0]) } else { g(&traj.eval(after)) };
    for k in first..traj.len() {
        let t = traj.times[k];
        let gk = g(&traj.states[k]);
        if t > prev_t && crosses(prev_g, gk) {
            return Some(bisect_crossing(traj, &g, prev_t, t, prev_g));
        }
        prev_t = t;
        prev_g = gk;
    }
    None
}

fn bisect_crossing<G>(traj: &Trajectory, g: &G, mut lo: f64, mut hi: f64, g_lo: f64) -> f64
where
    G: Fn(&StateVector) -> f64,
{
    let tol = (hi - lo) / 1000.0;
    let lo_sign = g_lo > 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (g(&traj.eval(mid)) > 0.0) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Integrates the model from `t0` to `t1`, reporting on the uniform grid
/// `t0, t0 + output_dt, ...` plus `t1` itself.
///
/// Step failure is reported through [`Trajectory::termination`] together
/// with the samples produced up to that point.
pub fn integrate(
    params: &ModelParams,
    state0: StateVector,
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    integrate_until(params, state0, t0, t1, config, |_, _| false)
}

/// Like [`integrate`], but stops after the first accepted step whose end
/// state satisfies `stop`.
pub fn integrate_until<F>(
    params: &ModelParams,
    state0: StateVector,
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
    stop: F,
) -> Result<Trajectory>
where
    F: Fn(f64, &StateVector) -> bool,
{
    params.validate()?;
    state0.validate()?;
    config.validate()?;
    if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
        return Err(Error::IntegratorConfig(format!("invalid span [{t0}, {t1}]")));
    }
    let grid = OutputGrid::new(t0, t1, config.output_dt);
    Ok(Solver::new(params, config).run(state0.to_array(), t0, t1, grid, stop))
}

/// Integrates and reports at an explicit list of increasing times inside
/// `[t0, t1]`.
pub(crate) fn integrate_on(
    params: &ModelParams,
    state0: StateVector,
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
    sample_times: Vec<f64>,
) -> Result<Trajectory> {
    params.validate()?;
    state0.validate()?;
    config.validate()?;
    let grid = OutputGrid { times: sample_times, next: 0 };
    Ok(Solver::new(params, config).run(state0.to_array(), t0, t1, grid, |_, _| false))
}

/// Uniform grid times for `[t0, t1]` at spacing `dt`, with `t1` appended
/// when it does not fall on the grid.
pub fn uniform_grid(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let span = t1 - t0;
    let n = (span / dt + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * dt).collect();
    let last = *times.last().unwrap();
    if t1 - last > dt * 1e-9 {
        times.push(t1);
    } else if let Some(l) = times.last_mut() {
        *l = t1;
    }
    if times.len() > 1 && times[times.len() - 1] <= times[times.len() - 2] {
        times.pop();
    }
    times
}

struct OutputGrid {
    times: Vec<f64>,
    next: usize,
}

impl OutputGrid {
    fn new(t0: f64, t1: f64, dt: f64) -> Self {
        Self { times: uniform_grid(t0, t1, dt), next: 0 }
    }
}

struct Solver<'a> {
    params: &'a ModelParams,
    cfg: &'a IntegratorConfig,
    stats: StepStats,
}

impl<'a> Solver<'a> {
    fn new(params: &'a ModelParams, cfg: &'a IntegratorConfig) -> Self {
        Self { params, cfg, stats: StepStats::default() }
    }

    fn f(&mut self, y: &Vec5) -> Vec5 {
        self.stats.rhs_evals += 1;
        rhs_array(y, self.params)
    }

    fn run<F>(mut self, y0: Vec5, t0: f64, t1: f64, mut grid: OutputGrid, stop: F) -> Trajectory
    where
        F: Fn(f64, &StateVector) -> bool,
    {
        let cap = grid.times.len();
        let mut times = Vec::with_capacity(cap);
        let mut states = Vec::with_capacity(cap);
        let mut dense = Vec::new();

        while grid.next < grid.times.len() && grid.times[grid.next] <= t0 {
            times.push(grid.times[grid.next]);
            states.push(StateVector::from_array(y0));
            grid.next += 1;
        }

        let mut t = t0;
        let mut y = y0;
        let mut k1 = self.f(&y);
        let mut h = self.cfg.h_init.min(t1 - t0).max(0.0);
        let mut err_old: f64 = 1e-4;
        let mut last_rejected = false;
        let mut termination = Termination::ReachedHorizon;

        while t < t1 {
            if self.stats.accepted + self.stats.rejected >= self.cfg.max_steps {
                termination = Termination::StepFailure { t, reason: "max_steps exceeded".into() };
                break;
            }
            let remaining = t1 - t;
            let final_step = h >= remaining * (1.0 - 1e-12);
            if final_step {
                h = remaining;
            }

            let (y1, k7, err, stages) = self.step(&y, &k1, h);

            if !(err <= 1.0) {
                self.stats.rejected += 1;
                let fac = if err.is_finite() { (SAFETY * err.powf(-0.2)).max(FAC_MIN) } else { FAC_MIN };
                h *= fac.min(1.0);
                last_rejected = true;
                if h < self.cfg.h_min {
                    termination = Termination::StepFailure { t, reason: format!("step size {h:e} below h_min") };
                    break;
                }
                continue;
            }

            // Non-negativity: tiny overshoot is clamped, anything larger is
            // treated as a failed step.
            let mut y1 = y1;
            let mut k7 = k7;
            let mut clamped = false;
            let mut too_negative = false;
            for (k, v) in y1.iter_mut().enumerate() {
                if *v < 0.0 {
                    if -*v < self.cfg.abs_tol[k] {
                        *v = 0.0;
                        clamped = true;
                    } else {
                        too_negative = true;
                    }
                }
            }
            if too_negative {
                self.stats.rejected += 1;
                self.stats.negativity_rejections += 1;
                h *= 0.5;
                last_rejected = true;
                if h < self.cfg.h_min {
                    termination = Termination::StepFailure {
                        t,
                        reason: "negative state not resolvable above h_min".into(),
                    };
                    break;
                }
                continue;
            }
            if clamped {
                k7 = self.f(&y1);
            }

            self.stats.accepted += 1;
            let t_new = if final_step { t1 } else { t + h };
            let step = dense_step(t, h, &y, &y1, &k1, &k7, &stages);

            while grid.next < grid.times.len() && grid.times[grid.next] <= t_new {
                let ts = grid.times[grid.next];
                let v = if ts >= t_new { y1 } else { clamp_tiny(step.eval(ts), &self.cfg.abs_tol) };
                times.push(ts);
                states.push(StateVector::from_array(v));
                grid.next += 1;
            }
            if self.cfg.store_dense {
                dense.push(step);
            }

            // PI controller.
            let err_c = err.max(1e-10);
            let mut fac = err_c.powf(EXPO) / err_old.powf(PI_BETA) / SAFETY;
            fac = fac.clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            err_old = err_c.max(1e-4);
            last_rejected = false;

            t = t_new;
            y = y1;
            k1 = k7;
            h = h_new.min(self.cfg.h_max);

            let sv = StateVector::from_array(y);
            if stop(t, &sv) && t < t1 {
                termination = Termination::EventStop { t };
                if times.last() != Some(&t) {
                    times.push(t);
                    states.push(sv);
                }
                break;
            }
        }

        Trajectory { times, states, step_stats: self.stats, termination, params: Some(*self.params), dense }
    }

    /// One Dormand-Prince step: returns `(y1, k7, err, [k2..k6])`.
    fn step(&mut self, y: &Vec5, k1: &Vec5, h: f64) -> (Vec5, Vec5, f64, [Vec5; 5]) {
        let comb = |ws: &[(f64, &Vec5)]| -> Vec5 {
            std::array::from_fn(|i| y[i] + h * ws.iter().map(|(w, k)| w * k[i]).sum::<f64>())
        };
        let k2 = self.f(&comb(&[(A21, k1)]));
        let k3 = self.f(&comb(&[(A31, k1), (A32, &k2)]));
        let k4 = self.f(&comb(&[(A41, k1), (A42, &k2), (A43, &k3)]));
        let k5 = self.f(&comb(&[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = self.f(&comb(&[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y1 = comb(&[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = self.f(&y1);

        let mut err: f64 = 0.0;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.cfg.abs_tol[i] + self.cfg.rel_tol * y[i].abs().max(y1[i].abs());
            err = err.max((e / sc).abs());
        }
        if y1.iter().any(|v| !v.is_finite()) {
            err = f64::INFINITY;
        }
        (y1, k7, err, [k2, k3, k4, k5, k6])
    }
}

fn dense_step(t: f64, h: f64, y: &Vec5, y1: &Vec5, k1: &Vec5, k7: &Vec5, st: &[Vec5; 5]) -> DenseStep {
    let [_, k3, k4, k5, k6] = st;
    let mut cont = [[0.0; N]; 5];
    for i in 0..N {
        let ydiff = y1[i] - y[i];
        let bspl = h * k1[i] - ydiff;
        cont[0][i] = y[i];
        cont[1][i] = ydiff;
        cont[2][i] = bspl;
        cont[3][i] = ydiff - h * k7[i] - bspl;
        cont[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    DenseStep { t0: t, h, cont }
}

fn clamp_tiny(mut v: Vec5, abs_tol: &[f64; 5]) -> Vec5 {
    for (x, tol) in v.iter_mut().zip(abs_tol) {
        if *x < 0.0 && -*x < *tol {
            *x = 0.0;
        }
    }
    v
}
