//! Configuration files, CSV / JSON / SVG output and the command drivers
//! behind the `icbsim` binary.
//!
//! Configs are TOML. Every table rejects unknown keys, and every missing key
//! takes its default, so an empty file is the baseline run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::{fit_delay, FitResult, FitSpec};
use crate::dosing::{simulate_with_doses, Dose, DoseSchedule, JourneyReport};
use crate::error::{Error, Result};
use crate::experiments::{find_threshold, oat_sensitivity, region_map, AxisSpec, RegionMap, SensitivityRow};
use crate::integrator::{IntegratorConfig, StepStats, Termination, Trajectory};
use crate::metrics::{simulate_and_classify, MetricsConfig, ResponseClass, ResponseReport, RunSettings};
use crate::model::{Component, ModelParams, ParamId, StateVector, DEFAULT_SIGNAL_SEED};

/// Version stamped into every JSON report and matched by the files in
/// `schemas/`.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Exact CSV header of trajectory files.
pub const CSV_HEADER: &str = "t,C,A,I,E,S";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    /// Initial `A` and `I` when not given explicitly.
    pub signal_seed: Option<f64>,
    pub c: Option<f64>,
    pub a: Option<f64>,
    pub i: Option<f64>,
    pub e: Option<f64>,
    pub s: Option<f64>,
}

impl InitialConfig {
    fn overrides_state(&self) -> bool {
        [self.c, self.a, self.i, self.e, self.s].iter().any(Option::is_some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivityConfig {
    pub fraction: f64,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self { fraction: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub param: ParamId,
    pub lo: f64,
    pub hi: f64,
    /// Absolute bracket width to stop at; defaults to `(hi - lo) / 1000`.
    #[serde(default)]
    pub resolution: Option<f64>,
}

impl ThresholdConfig {
    pub fn resolution(&self) -> f64 {
        self.resolution.unwrap_or((self.hi - self.lo).abs() / 1000.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Rows of the map.
    pub axis1: AxisSpec,
    /// Columns of the map.
    pub axis2: AxisSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlotSpec {
    pub variables: Vec<Component>,
    pub log_y: bool,
    /// Only plot `t <= t_max`.
    pub t_max: Option<f64>,
    pub width: f64,
    pub height: f64,
    pub title: Option<String>,
}

impl Default for PlotSpec {
    fn default() -> Self {
        Self { variables: Component::ALL.to_vec(), log_y: true, t_max: None, width: 800.0, height: 480.0, title: None }
    }
}

/// Everything one command invocation needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: ModelParams,
    pub initial: InitialConfig,
    pub integrator: IntegratorConfig,
    pub metrics: MetricsConfig,
    /// Simulated and observed span in days; overrides `metrics.horizon`.
    pub horizon: Option<f64>,
    pub sensitivity: SensitivityConfig,
    pub threshold: Option<ThresholdConfig>,
    pub sweep: Option<SweepConfig>,
    pub fit: Option<FitSpec>,
    pub doses: Vec<Dose>,
    pub plot: PlotSpec,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.integrator.validate()?;
        self.metrics().validate()?;
        self.initial_state().validate()?;
        if let Some(seed) = self.initial.signal_seed {
            if !(seed >= 0.0 && seed.is_finite()) {
                return Err(Error::Config(format!("initial.signal_seed = {seed} must be finite and >= 0")));
            }
        }
        if !(self.sensitivity.fraction.is_finite() && self.sensitivity.fraction != 0.0) {
            return Err(Error::Config("sensitivity.fraction must be finite and non-zero".into()));
        }
        if let Some(th) = &self.threshold {
            if !(th.lo < th.hi && th.resolution() > 0.0) {
                return Err(Error::Config("threshold needs lo < hi and a positive resolution".into()));
            }
        }
        if let Some(fit) = &self.fit {
            fit.validate(self.metrics().horizon)?;
        }
        self.schedule()?;
        if self.plot.variables.is_empty() || !(self.plot.width > 0.0 && self.plot.height > 0.0) {
            return Err(Error::Config("plot needs at least one variable and a positive size".into()));
        }
        Ok(())
    }

    pub fn metrics(&self) -> MetricsConfig {
        match self.horizon {
            Some(h) => self.metrics.with_horizon(h),
            None => self.metrics.clone(),
        }
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings { signal_seed: self.initial.signal_seed, integrator: self.integrator.clone(), metrics: self.metrics() }
    }

    pub fn initial_state(&self) -> StateVector {
        let seed = self.initial.signal_seed.unwrap_or(DEFAULT_SIGNAL_SEED);
        let base = crate::model::initial_state(&self.params, seed);
        let ic = &self.initial;
        StateVector {
            c: ic.c.unwrap_or(base.c),
            a: ic.a.unwrap_or(base.a),
            i: ic.i.unwrap_or(base.i),
            e: ic.e.unwrap_or(base.e),
            s: ic.s.unwrap_or(base.s),
        }
    }

    pub fn schedule(&self) -> Result<DoseSchedule> {
        DoseSchedule::new(self.doses.clone())
    }

    fn require_derived_state(&self, command: &str) -> Result<()> {
        if self.initial.overrides_state() {
            return Err(Error::Config(format!(
                "`{command}` derives the initial state from the parameters; remove c/a/i/e/s from [initial]"
            )));
        }
        Ok(())
    }
}

/// Parses and validates a TOML config.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

// ---------------------------------------------------------------- CSV

pub fn write_csv<W: std::io::Write>(traj: &Trajectory, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for (t, y) in traj.times.iter().zip(&traj.states) {
        writeln!(out, "{t:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", y.c, y.a, y.i, y.e, y.s)?;
    }
    Ok(())
}

pub fn emit_csv(traj: &Trajectory) -> Vec<u8> {
    let mut buf = Vec::with_capacity(traj.len() * 140 + 16);
    write_csv(traj, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

/// Reads back a trajectory CSV as `(times, states)`.
pub fn parse_csv(text: &str) -> Result<(Vec<f64>, Vec<StateVector>)> {
    let mut lines = text.lines();
    match lines.next() {
        Some(CSV_HEADER) => {}
        other => return Err(Error::Config(format!("bad CSV header {other:?}"))),
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (k, line) in lines.enumerate() {
        let vals = line
            .split(',')
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(format!("CSV row {}: {e}", k + 1)))?;
        if vals.len() != 6 {
            return Err(Error::Config(format!("CSV row {} has {} fields", k + 1, vals.len())));
        }
        times.push(vals[0]);
        states.push(StateVector::from_array([vals[1], vals[2], vals[3], vals[4], vals[5]]));
    }
    Ok((times, states))
}

// ---------------------------------------------------------------- JSON

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    params: &'a ModelParams,
    result: &'a T,
}

/// Pretty JSON report wrapped in the versioned envelope.
pub fn emit_json<T: Serialize>(command: &str, params: &ModelParams, result: &T) -> Result<Vec<u8>> {
    let env = Envelope { schema_version: REPORT_SCHEMA_VERSION, command, params, result };
    let mut buf = serde_json::to_vec_pretty(&env).map_err(|e| Error::Config(e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}

// ---------------------------------------------------------------- SVG

fn color(c: Component) -> &'static str {
    match c {
        Component::C => "#d62728",
        Component::A => "#ff7f0e",
        Component::I => "#9467bd",
        Component::E => "#2ca02c",
        Component::S => "#1f77b4",
    }
}

pub fn class_color(class: Option<ResponseClass>) -> &'static str {
    match class {
        Some(ResponseClass::NoResponse) => "#9e9e9e",
        Some(ResponseClass::Delayed) => "#f0b429",
        Some(ResponseClass::QuickPartial) => "#74a9cf",
        Some(ResponseClass::QuickFull) => "#0868ac",
        None => "#ffffff",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn fmt_axis(v: f64) -> String {
    let s = format!("{v:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

fn svg_open(out: &mut String, width: f64, height: f64, title: Option<&str>) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
    if let Some(t) = title {
        let _ = writeln!(out, r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, escape(t));
    }
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = (f.left, f.top + f.height, f.left + f.width, f.top);
    let _ = writeln!(out, r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x1:.1}" y2="{y0:.1}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x0:.1}" y2="{y1:.1}" stroke="black"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        f.left + f.width / 2.0,
        y0 + 38.0,
        escape(x_label)
    );
    let (cx, cy) = (f.left * 0.3, f.top + f.height / 2.0);
    let _ = writeln!(
        out,
        r#"<text x="{cx:.1}" y="{cy:.1}" text-anchor="middle" transform="rotate(-90 {cx:.1} {cy:.1})">{}</text>"#,
        escape(y_label)
    );
}

fn x_tick(out: &mut String, f: &Frame, x: f64, label: &str) {
    let y = f.top + f.height;
    let _ = writeln!(out, r#"<line x1="{x:.1}" y1="{y:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#, y + 5.0);
    let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#, y + 18.0);
}

fn y_tick(out: &mut String, f: &Frame, y: f64, label: &str) {
    let x = f.left;
    let _ = writeln!(out, r#"<line x1="{:.1}" y1="{y:.1}" x2="{x:.1}" y2="{y:.1}" stroke="black"/>"#, x - 5.0);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#, x - 8.0, y + 4.0);
}

/// Min/max decimation per pixel column so spikes survive downsampling.
fn decimate(points: &[(f64, f64)], columns: usize) -> Vec<(f64, f64)> {
    if points.len() <= 2 * columns {
        return points.to_vec();
    }
    let (t0, t1) = (points[0].0, points[points.len() - 1].0);
    let span = (t1 - t0).max(f64::MIN_POSITIVE);
    let mut out = Vec::with_capacity(2 * columns + 2);
    let mut k = 0;
    while k < points.len() {
        let col = (((points[k].0 - t0) / span) * columns as f64) as usize;
        let mut lo = k;
        let mut hi = k;
        let mut j = k;
        while j < points.len() && (((points[j].0 - t0) / span) * columns as f64) as usize == col {
            if points[j].1 < points[lo].1 {
                lo = j;
            }
            if points[j].1 > points[hi].1 {
                hi = j;
            }
            j += 1;
        }
        let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        out.push(points[a]);
        if b != a {
            out.push(points[b]);
        }
        k = j;
    }
    out
}

/// Line chart of selected state variables against time.
pub fn emit_svg_trajectory(traj: &Trajectory, spec: &PlotSpec) -> Result<String> {
    if traj.len() == 0 || spec.variables.is_empty() {
        return Err(Error::Plot("nothing to plot".into()));
    }
    let t_max = spec.t_max.unwrap_or(f64::INFINITY);
    let idx: Vec<usize> = (0..traj.len()).filter(|&k| traj.times[k] <= t_max).collect();
    if idx.is_empty() {
        return Err(Error::Plot("no samples before t_max".into()));
    }
    let (t_lo, t_hi) = (traj.times[idx[0]], traj.times[*idx.last().unwrap()]);
    let t_span = if t_hi > t_lo { t_hi - t_lo } else { 1.0 };

    let values = |c: Component| idx.iter().map(move |&k| traj.states[k].get(c));
    let y_max = spec.variables.iter().flat_map(|&c| values(c)).fold(f64::NEG_INFINITY, f64::max);
    let (y_lo, y_hi) = if spec.log_y {
        let min_pos = spec.variables.iter().flat_map(|&c| values(c)).filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
        let hi = if y_max > 0.0 { y_max } else { 1.0 };
        let lo = if min_pos.is_finite() { min_pos.max(hi * 1e-12) } else { hi * 1e-6 };
        let (lo, hi) = (lo.log10().floor(), hi.log10().ceil());
        (lo, if hi > lo { hi } else { lo + 1.0 })
    } else {
        let y_min = spec.variables.iter().flat_map(|&c| values(c)).fold(f64::INFINITY, f64::min).min(0.0);
        (y_min, if y_max > y_min { y_max * 1.05 } else { y_min + 1.0 })
    };
    let f = Frame { left: 80.0, top: 30.0, width: spec.width - 170.0, height: spec.height - 80.0 };
    let sx = |t: f64| f.left + (t - t_lo) / t_span * f.width;
    let sy = |v: f64| {
        let u = if spec.log_y { v.max(10f64.powf(y_lo)).log10() } else { v };
        f.top + f.height - (u - y_lo) / (y_hi - y_lo) * f.height
    };

    let mut out = String::new();
    svg_open(&mut out, spec.width, spec.height, spec.title.as_deref());
    axes(&mut out, &f, "t (days)", if spec.log_y { "concentration (log scale)" } else { "concentration" });
    for t in nice_ticks(t_lo, t_lo + t_span, 6) {
        x_tick(&mut out, &f, sx(t), &fmt_tick(t));
    }
    if spec.log_y {
        for e in y_lo as i32..=y_hi as i32 {
            y_tick(&mut out, &f, sy(10f64.powi(e)), &format!("1e{e}"));
        }
    } else {
        for v in nice_ticks(y_lo, y_hi, 5) {
            y_tick(&mut out, &f, sy(v), &fmt_tick(v));
        }
    }
    for (n, &c) in spec.variables.iter().enumerate() {
        let pts: Vec<(f64, f64)> = idx.iter().map(|&k| (traj.times[k], traj.states[k].get(c))).collect();
        let mut path = String::new();
        for (t, v) in decimate(&pts, f.width as usize) {
            let _ = write!(path, "{:.2},{:.2} ", sx(t), sy(v));
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            color(c),
            path.trim_end()
        );
        let (lx, ly) = (f.left + f.width + 20.0, f.top + 10.0 + 20.0 * n as f64);
        let _ = writeln!(
            out,
            r#"<g class="legend"><line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{}</text></g>"#,
            lx + 24.0,
            color(c),
            lx + 30.0,
            ly + 4.0,
            c.label()
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// One filled cell per grid point, coloured by response class.
pub fn emit_svg_region_map(map: &RegionMap, title: Option<&str>) -> Result<String> {
    let (rows, cols) = (map.rows(), map.cols());
    if rows == 0 || cols == 0 {
        return Err(Error::Plot("empty region map".into()));
    }
    let (width, height) = (800.0, 560.0);
    let f = Frame { left: 100.0, top: 30.0, width: width - 260.0, height: height - 80.0 };
    let (cw, ch) = (f.width / cols as f64, f.height / rows as f64);

    let mut out = String::new();
    svg_open(&mut out, width, height, title);
    for (r, row) in map.classes.iter().enumerate() {
        for (c, class) in row.iter().enumerate() {
            // row 0 at the bottom so axis1 increases upwards
            let y = f.top + f.height - (r + 1) as f64 * ch;
            let x = f.left + c as f64 * cw;
            let _ = writeln!(
                out,
                r#"<rect class="cell" x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{}" shape-rendering="crispEdges"/>"#,
                class_color(*class)
            );
        }
    }
    axes(&mut out, &f, map.axis2.param.name(), map.axis1.param.name());
    let xs = map.axis2.values();
    let ys = map.axis1.values();
    let every = |n: usize| n.div_ceil(6).max(1);
    for (c, v) in xs.iter().enumerate().step_by(every(cols)) {
        x_tick(&mut out, &f, f.left + (c as f64 + 0.5) * cw, &fmt_axis(*v));
    }
    for (r, v) in ys.iter().enumerate().step_by(every(rows)) {
        y_tick(&mut out, &f, f.top + f.height - (r as f64 + 0.5) * ch, &fmt_axis(*v));
    }
    for (n, class) in ResponseClass::ALL.iter().enumerate() {
        let (lx, ly) = (f.left + f.width + 20.0, f.top + 10.0 + 22.0 * n as f64);
        let _ = writeln!(
            out,
            r#"<g class="legend"><rect x="{lx:.1}" y="{:.1}" width="16" height="16" fill="{}" stroke="black"/><text x="{:.1}" y="{:.1}">{}</text></g>"#,
            ly - 12.0,
            class_color(Some(*class)),
            lx + 22.0,
            ly + 1.0,
            class.name()
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

// ---------------------------------------------------------------- commands

/// Files written by one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputBundle {
    pub trajectory_csv: Option<PathBuf>,
    pub report_json: PathBuf,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateResult {
    pub initial: StateVector,
    pub samples: usize,
    pub termination: Termination,
    pub step_stats: StepStats,
    pub report: ResponseReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityResult {
    pub fraction: f64,
    pub baseline: ResponseReport,
    pub rows: Vec<SensitivityRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DoseResult {
    pub schedule: DoseSchedule,
    pub journey: JourneyReport,
}

struct Writer<'a> {
    out: &'a Path,
    command: &'static str,
}

impl Writer<'_> {
    fn path(&self, ext: &str) -> PathBuf {
        self.out.join(format!("{}.{ext}", self.command))
    }

    fn put(&self, ext: &str, bytes: &[u8]) -> Result<PathBuf> {
        fs::create_dir_all(self.out)?;
        let p = self.path(ext);
        fs::write(&p, bytes)?;
        Ok(p)
    }

    fn json<T: Serialize>(&self, params: &ModelParams, result: &T) -> Result<PathBuf> {
        self.put("json", &emit_json(self.command, params, result)?)
    }
}

fn run_trajectory(config: &RunConfig) -> Result<(Trajectory, ResponseReport)> {
    simulate_and_classify(&config.params, config.initial_state(), &config.integrator, &config.metrics())
}

fn trajectory_outputs(
    w: &Writer,
    config: &RunConfig,
    traj: &Trajectory,
    svg: bool,
    with_csv: bool,
) -> Result<(Option<PathBuf>, Option<PathBuf>)> {
    let csv = if with_csv { Some(w.put("csv", &emit_csv(traj))?) } else { None };
    let svg = if svg { Some(w.put("svg", emit_svg_trajectory(traj, &config.plot)?.as_bytes())?) } else { None };
    Ok((csv, svg))
}

pub fn cmd_simulate(config: &RunConfig, out: &Path, svg: bool) -> Result<OutputBundle> {
    let w = Writer { out, command: "simulate" };
    let (traj, report) = run_trajectory(config)?;
    let (trajectory_csv, svg) = trajectory_outputs(&w, config, &traj, svg, true)?;
    let result = SimulateResult {
        initial: traj.initial(),
        samples: traj.len(),
        termination: traj.termination.clone(),
        step_stats: traj.step_stats,
        report,
    };
    Ok(OutputBundle { trajectory_csv, report_json: w.json(&config.params, &result)?, svg })
}

pub fn cmd_classify(config: &RunConfig, out: &Path, svg: bool) -> Result<OutputBundle> {
    let w = Writer { out, command: "classify" };
    let (traj, report) = run_trajectory(config)?;
    let (trajectory_csv, svg) = trajectory_outputs(&w, config, &traj, svg, false)?;
    Ok(OutputBundle { trajectory_csv, report_json: w.json(&config.params, &report)?, svg })
}

pub fn cmd_sensitivity(config: &RunConfig, out: &Path) -> Result<OutputBundle> {
    config.require_derived_state("sensitivity")?;
    let w = Writer { out, command: "sensitivity" };
    let settings = config.settings();
    let baseline = settings.evaluate(&config.params)?;
    let rows = oat_sensitivity(&config.params, config.sensitivity.fraction, &settings)?;
    let result = SensitivityResult { fraction: config.sensitivity.fraction, baseline, rows };
    Ok(OutputBundle { trajectory_csv: None, report_json: w.json(&config.params, &result)?, svg: None })
}

pub fn cmd_threshold(config: &RunConfig, threshold: &ThresholdConfig, out: &Path) -> Result<OutputBundle> {
    config.require_derived_state("threshold")?;
    let w = Writer { out, command: "threshold" };
    let r = find_threshold(
        &config.params,
        threshold.param,
        threshold.lo,
        threshold.hi,
        threshold.resolution(),
        &config.settings(),
    )?;
    Ok(OutputBundle { trajectory_csv: None, report_json: w.json(&config.params, &r)?, svg: None })
}

pub fn cmd_sweep(config: &RunConfig, sweep: &SweepConfig, out: &Path, svg: bool) -> Result<OutputBundle> {
    config.require_derived_state("sweep")?;
    let w = Writer { out, command: "sweep" };
    let map = region_map(&config.params, sweep.axis1, sweep.axis2, &config.settings())?;
    let svg = if svg {
        let title = config.plot.title.as_deref();
        Some(w.put("svg", emit_svg_region_map(&map, title)?.as_bytes())?)
    } else {
        None
    };
    Ok(OutputBundle { trajectory_csv: None, report_json: w.json(&config.params, &map)?, svg })
}

pub fn cmd_fit(config: &RunConfig, spec: &FitSpec, out: &Path, svg: bool) -> Result<OutputBundle> {
    config.require_derived_state("fit")?;
    let w = Writer { out, command: "fit" };
    let settings = config.settings();
    let r: FitResult = fit_delay(spec, &config.params, &settings)?;
    let (traj, _) = settings.simulate(&r.fitted)?;
    let (trajectory_csv, svg) = trajectory_outputs(&w, config, &traj, svg, true)?;
    Ok(OutputBundle { trajectory_csv, report_json: w.json(&config.params, &r)?, svg })
}

pub fn cmd_dose(config: &RunConfig, schedule: &DoseSchedule, out: &Path, svg: bool) -> Result<OutputBundle> {
    let w = Writer { out, command: "dose" };
    let metrics = config.metrics();
    let (traj, journey) =
        simulate_with_doses(&config.params, config.initial_state(), schedule, metrics.horizon, &config.settings())?;
    let (trajectory_csv, svg) = trajectory_outputs(&w, config, &traj, svg, true)?;
    let result = DoseResult { schedule: schedule.clone(), journey };
    Ok(OutputBundle { trajectory_csv, report_json: w.json(&config.params, &result)?, svg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::baseline_params;

    #[test]
    fn empty_config_is_baseline() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.params, baseline_params());
        assert_eq!(cfg.initial_state(), crate::model::initial_state(&baseline_params(), 1.0));
    }

    #[test]
    fn single_override() {
        let cfg = parse_config("[params]\ngamma = 37.4168\n").unwrap();
        assert_eq!(cfg.params, baseline_params().with(ParamId::Gamma, 37.4168));
        assert_eq!(cfg.integrator, IntegratorConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config("[params]\ngamm = 37.4\n").unwrap_err().to_string();
        assert!(err.contains("gamm"), "{err}");
        let err = parse_config("horizn = 10\n").unwrap_err().to_string();
        assert!(err.contains("horizn"), "{err}");
    }

    #[test]
    fn invalid_value_names_field() {
        let err = parse_config("[params]\ndelta_a = -1\n").unwrap_err().to_string();
        assert!(err.contains("delta_a"), "{err}");
    }

    #[test]
    fn horizon_overrides_metrics() {
        let cfg = parse_config("horizon = 300\n[metrics]\nquick_cutoff = 20\n").unwrap();
        assert_eq!(cfg.metrics().horizon, 300.0);
        assert_eq!(cfg.metrics().quick_cutoff, 20.0);
    }

    #[test]
    fn full_config_parses() {
        let text = r#"
horizon = 400
[params]
beta = 0.009
[initial]
signal_seed = 0.5
[integrator]
rel_tol = 1e-9
abs_tol = [1e-9, 1e-9, 1e-9, 1e-10, 1e-10]
[sensitivity]
fraction = -0.01
[threshold]
param = "gamma"
lo = 37.40
hi = 37.45
resolution = 1e-4
[sweep]
axis1 = { param = "beta", lo = 0.0089, hi = 0.0091, count = 3 }
axis2 = { param = "gamma", lo = 37.40, hi = 37.43, count = 4 }
[fit]
free_params = ["beta", "gamma"]
bounds = [[0.0089, 0.0091], [37.40, 37.43]]
init = [0.00899, 37.4145]
target_delay = 60
[[doses]]
time = 0
delta_beta = 1.2e-6
[[doses]]
time = 21
delta_gamma = 0.0028
[plot]
variables = ["C", "E"]
log_y = false
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.initial_state().a, 0.5);
        assert_eq!(cfg.threshold.unwrap().param, ParamId::Gamma);
        assert_eq!(cfg.sweep.unwrap().axis2.count, 4);
        assert_eq!(cfg.fit.unwrap().target_delay, 60.0);
        assert_eq!(cfg.doses.len(), 2);
        assert_eq!(cfg.plot.variables, vec![Component::C, Component::E]);
    }

    #[test]
    fn bad_schedule_rejected() {
        let text = "[[doses]]\ntime = 10\n[[doses]]\ntime = 5\n";
        assert!(parse_config(text).is_err());
    }

    fn tiny_traj() -> Trajectory {
        Trajectory::from_samples(
            vec![0.0, 0.5, 1.0],
            vec![
                StateVector::from_array([1000.0, 1.0, 1.0, 0.0, 5.0]),
                StateVector::from_array([900.0, 0.1, 1e-30, 0.3, 4.7]),
                StateVector::from_array([1.0 / 3.0, 0.0, 2.0, 4.0, 6.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let traj = tiny_traj();
        let text = String::from_utf8(emit_csv(&traj)).unwrap();
        assert!(text.starts_with("t,C,A,I,E,S\n"));
        assert!(text.ends_with('\n'));
        let (times, states) = parse_csv(&text).unwrap();
        assert_eq!(times, traj.times);
        assert_eq!(states, traj.states);
    }

    #[test]
    fn csv_single_sample() {
        let traj = Trajectory::from_samples(vec![0.0], vec![StateVector::from_array([1.0; 5])]).unwrap();
        let text = String::from_utf8(emit_csv(&traj)).unwrap();
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn svg_polylines_match_variables() {
        let traj = tiny_traj();
        let one = PlotSpec { variables: vec![Component::C], ..PlotSpec::default() };
        let svg = emit_svg_trajectory(&traj, &one).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let svg = emit_svg_trajectory(&traj, &PlotSpec { log_y: false, ..PlotSpec::default() }).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 5);
        assert_eq!(svg.matches(r#"class="legend""#).count(), 5);
    }

    #[test]
    fn svg_rejects_empty() {
        let empty = PlotSpec { variables: vec![], ..PlotSpec::default() };
        assert!(emit_svg_trajectory(&tiny_traj(), &empty).is_err());
    }

    #[test]
    fn decimation_keeps_extremes() {
        let pts: Vec<(f64, f64)> = (0..10_000).map(|k| (k as f64, if k == 4321 { 99.0 } else { 0.0 })).collect();
        let d = decimate(&pts, 100);
        assert!(d.len() <= 200);
        assert!(d.contains(&(4321.0, 99.0)));
    }

    #[test]
    fn ticks() {
        assert_eq!(nice_ticks(0.0, 10.0, 5), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(fmt_tick(2.5), "2.5");
    }
}
